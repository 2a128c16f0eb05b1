#pragma once

#include <atomic>
#include <filesystem>
#include <string>

#include <unistd.h>

#include <lmgc/fixtures.hpp>
#include <lmgc/model.hpp>

namespace testing {

namespace fs = std::filesystem;

/// Scratch directory removed on scope exit.
class TempDir {
public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("lmgc-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
  fs::path path_;
};

inline lmgc::ModelConfig small_config(std::size_t vocab, std::size_t hidden = 16, std::uint64_t seed = 1) {
  lmgc::ModelConfig c;
  c.layers = 2;
  c.hidden = hidden;
  c.heads = 2;
  c.ff = 2 * hidden;
  c.vocab = vocab;
  c.max_positions = 64;
  c.dropout = 0.0;
  c.seed = seed;
  return c;
}

/// Synthetic data already compiled into groups.
struct Compiled {
  lmgc::SyntheticData data;
  lmgc::Vocabulary vocab;
  std::vector<lmgc::CandidateGroup> groups;
};

inline Compiled compile(const lmgc::SyntheticSpec& spec, std::size_t max_len = 64) {
  Compiled c{lmgc::generate(spec), {}, {}};
  c.vocab = lmgc::build_vocab(std::span<const lmgc::WsdCorpus>(&c.data.corpus, 1), &c.data.lexicon);
  lmgc::BuilderConfig b;
  b.max_len = max_len;
  b.seed = spec.seed;
  c.groups = lmgc::build_groups(c.data.corpus, c.data.gold, c.data.lexicon, c.vocab, b).groups;
  return c;
}

}  // namespace testing
