#include <catch_amalgamated.hpp>

#include <sstream>

#include <lmgc/cli.hpp>
#include <lmgc/lmgc.hpp>

#include "support.hpp"

using namespace lmgc;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, {out, err});
  return {code, out.str(), err.str()};
}

struct Workspace {
  testing::TempDir dir;
  SyntheticData data;

  Workspace() {
    SyntheticSpec spec;
    spec.n_lemmas = 6;
    spec.n_sentences = 60;
    spec.context_words = 5;
    spec.gloss_words = 3;
    spec.vocab_size = 30;
    spec.seed = 2;
    data = generate(spec);
    write_file(dir.file("lex.tsv"), export_tsv_lexicon(data.lexicon));
    write_file(dir.file("syn.data.xml"), export_framework_xml(data.corpus));
    write_file(dir.file("syn.gold.key.txt"), export_gold_keys(data.gold));
  }
  std::string f(const std::string& n) const { return dir.file(n); }
};

}  // namespace

TEST_CASE("version and usage") {
  auto r = run({"--version"});
  CHECK(r.code == 0);
  CHECK(r.out.find(LMGC_VERSION) != std::string::npos);
  CHECK(r.out.find("checkpoint format 1") != std::string::npos);

  r = run({"corpus-stats", "--xml", "a", "--keys", "b", "--lexicon", "c", "--bogus"});
  CHECK(r.code == 1);
  INFO(r.err);
  CHECK(r.err.find("--bogus") != std::string::npos);
  CHECK(r.err.find("Usage") != std::string::npos);
  CHECK(run({}).code == 1);
}

TEST_CASE("validation errors name the file and exit 1") {
  Workspace w;
  const auto r = run({"--out-dir", w.f("o"), "corpus-stats", "--xml", w.f("missing.xml"), "--keys", w.f("syn.gold.key.txt"),
                      "--lexicon", w.f("lex.tsv")});
  CHECK(r.code == 1);
  CHECK(r.err.find("missing.xml") != std::string::npos);

  write_file(w.f("bad.tsv"), "a\tb\n");
  const auto b = run({"--out-dir", w.f("o"), "corpus-stats", "--xml", w.f("syn.data.xml"), "--keys", w.f("syn.gold.key.txt"),
                      "--lexicon", w.f("bad.tsv")});
  CHECK(b.code == 1);
  CHECK(b.err.find("bad.tsv:1") != std::string::npos);
}

TEST_CASE("lexicon import and stats") {
  Workspace w;
  auto r = run({"--out-dir", w.f("o"), "import-lexicon", "--tsv", w.f("lex.tsv")});
  REQUIRE(r.code == 0);
  CHECK(parse_tsv_lexicon(read_file(w.f("o/lexicon.tsv"))) == w.data.lexicon);
  const json man = json::parse(read_file(w.f("o/manifest.import-lexicon.json")));
  CHECK(man.at("inputs").at(w.f("lex.tsv")) == cli::sha256_hex(read_file(w.f("lex.tsv"))));
  CHECK(man.at("command_line").size() == 5);

  r = run({"--out-dir", w.f("o"), "corpus-stats", "--xml", w.f("syn.data.xml"), "--keys", w.f("syn.gold.key.txt"),
           "--lexicon", w.f("lex.tsv")});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  const auto s = compute_stats(w.data.corpus, w.data.gold, w.data.lexicon);
  CHECK(j.at("total") == s.total);
  CHECK(j.at("positive_pairs") == s.positive_pairs);
  CHECK(j.at("negative_pairs") == s.negative_pairs);
  CHECK(j.at("unresolvable") == 0);
}

TEST_CASE("sha256 known answer") {
  CHECK(cli::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("full pipeline through the command line") {
  Workspace w;
  const std::string out = w.f("run");
  auto r = run({"--seed", "3", "--out-dir", out, "build-examples", "--xml", w.f("syn.data.xml"), "--keys",
                w.f("syn.gold.key.txt"), "--lexicon", w.f("lex.tsv"), "--max-len", "32"});
  REQUIRE(r.code == 0);
  const json built = json::parse(r.out);
  CHECK(built.at("groups") == 60);
  CHECK(built.at("fit_fraction") == 1.0);
  const std::string groups = out + "/syn.groups.jsonl";
  REQUIRE(std::filesystem::exists(groups));

  r = run({"--seed", "3", "--out-dir", out + "/m", "train", "--mode", "lmgc-m", "--groups", groups, "--val-groups", groups,
           "--vocab", out + "/vocab.json", "--epochs", "1", "--hidden", "16", "--ff", "32", "--max-len", "32"});
  REQUIRE(r.code == 0);
  CHECK(std::filesystem::exists(out + "/m/best.ckpt"));
  CHECK(json::parse(r.out).at("epochs").size() == 2);

  r = run({"--seed", "3", "--out-dir", out + "/ft", "finetune", "--checkpoint", out + "/m/best.ckpt", "--groups", groups,
           "--val-groups", groups, "--epochs", "1"});
  REQUIRE(r.code == 0);
  CHECK(std::filesystem::exists(out + "/ft/best.ckpt"));

  r = run({"--out-dir", out, "predict", "--checkpoint", out + "/ft/best.ckpt", "--vocab", out + "/vocab.json", "--xml",
           w.f("syn.data.xml"), "--lexicon", w.f("lex.tsv")});
  REQUIRE(r.code == 0);
  CHECK(parse_predictions(read_file(out + "/predictions.txt")).size() == 60);

  r = run({"--out-dir", out, "score", "--xml", w.f("syn.data.xml"), "--keys", w.f("syn.gold.key.txt"), "--predictions",
           out + "/predictions.txt", "--name", "semeval2007"});
  INFO(r.err);
  REQUIRE(r.code == 0);
  const ScoreReport rep = report_from_json(json::parse(read_file(out + "/report.json")));
  CHECK(rep.datasets.count("semeval2007") == 1);
  CHECK(rep.all.all.total == 60);

  r = run({"--out-dir", out, "report", "--input", out + "/report.json"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("| System | SE7 | SE2 | SE3 | SE13 | SE15 | All |") == 0);

  r = run({"--out-dir", out, "mfs", "--xml", w.f("syn.data.xml"), "--lexicon", w.f("lex.tsv"), "--keys",
           w.f("syn.gold.key.txt")});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out).at("All").at("total") == 60);

  for (auto f : {"build-examples", "train", "finetune", "predict", "score", "report", "mfs"}) {
    const bool in_root = std::filesystem::exists(out + "/manifest." + f + ".json");
    const bool nested = std::filesystem::exists(out + "/m/manifest." + std::string(f) + ".json") ||
                        std::filesystem::exists(out + "/ft/manifest." + std::string(f) + ".json");
    CHECK((in_root || nested));
  }
  const json tm = json::parse(read_file(out + "/m/manifest.train.json"));
  CHECK(tm.at("config").at("mode") == "lmgc_m");
  CHECK(tm.at("config").at("model").at("hidden") == 16);
  CHECK(tm.at("config_sha256").get<std::string>().size() == 64);
}

TEST_CASE("repeated runs leave identical artifacts") {
  Workspace w;
  auto once = [&](const std::string& out) {
    REQUIRE(run({"--seed", "9", "--out-dir", out, "build-examples", "--xml", w.f("syn.data.xml"), "--keys",
                 w.f("syn.gold.key.txt"), "--lexicon", w.f("lex.tsv"), "--max-len", "32"})
                .code == 0);
    REQUIRE(run({"--seed", "9", "--out-dir", out, "train", "--groups", out + "/syn.groups.jsonl", "--val-groups",
                 out + "/syn.groups.jsonl", "--vocab", out + "/vocab.json", "--epochs", "1", "--hidden", "16", "--ff",
                 "32", "--max-len", "32"})
                .code == 0);
  };
  once(w.f("a"));
  const std::string first = read_file(w.f("a/best.ckpt"));
  const std::string metrics = read_file(w.f("a/metrics.jsonl"));
  once(w.f("a"));
  CHECK(read_file(w.f("a/best.ckpt")) == first);
  CHECK(read_file(w.f("a/metrics.jsonl")) == metrics);
}

TEST_CASE("gradcheck subcommand") {
  testing::TempDir dir;
  for (auto mode : {"lmgc-multichoice", "lmgc-m"}) {
    const auto r = run({"--out-dir", dir.path().string(), "gradcheck", "--mode", mode, "--samples", "200"});
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    CHECK(j.at("checked").get<std::size_t>() >= 200);
    CHECK(j.at("max_rel_err").get<double>() < 1e-4);
    CHECK(j.at("worst").at(0).contains("coordinate"));
  }
  CHECK(run({"--out-dir", dir.path().string(), "gradcheck", "--mode", "downstream"}).code == 1);
}

TEST_CASE("config file drives training options") {
  Workspace w;
  const std::string out = w.f("c");
  REQUIRE(run({"--out-dir", out, "build-examples", "--xml", w.f("syn.data.xml"), "--keys", w.f("syn.gold.key.txt"),
               "--lexicon", w.f("lex.tsv"), "--max-len", "32"})
              .code == 0);
  write_file(w.f("cfg.json"), R"({"lr": 0.001, "epochs": 1, "batch_size": 8, "model": {"hidden": 8, "ff": 16, "max_positions": 32}})");
  auto r = run({"--config", w.f("cfg.json"), "--out-dir", out, "train", "--groups", out + "/syn.groups.jsonl", "--val-groups",
                out + "/syn.groups.jsonl", "--vocab", out + "/vocab.json"});
  REQUIRE(r.code == 0);
  const json cfg = json::parse(read_file(out + "/config.json"));
  CHECK(cfg.at("lr") == 0.001);
  CHECK(cfg.at("batch_size") == 8);
  CHECK(cfg.at("model").at("hidden") == 8);

  write_file(w.f("bad.json"), R"({"learning_rate": 1})");
  r = run({"--config", w.f("bad.json"), "--out-dir", out, "train", "--groups", out + "/syn.groups.jsonl", "--val-groups",
           out + "/syn.groups.jsonl", "--vocab", out + "/vocab.json"});
  CHECK(r.code == 1);
  CHECK(r.err.find("learning_rate") != std::string::npos);
}
