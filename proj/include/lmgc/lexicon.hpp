#pragma once

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "error.hpp"
#include "util.hpp"

namespace lmgc {

enum class PartOfSpeech { Noun, Verb, Adjective, Adverb };

inline constexpr PartOfSpeech kAllPos[] = {PartOfSpeech::Noun, PartOfSpeech::Verb,
                                           PartOfSpeech::Adjective, PartOfSpeech::Adverb};

/// Framework tag spelling: NOUN, VERB, ADJ, ADV.
inline constexpr std::string_view pos_tag(PartOfSpeech pos) {
  switch (pos) {
    case PartOfSpeech::Noun: return "NOUN";
    case PartOfSpeech::Verb: return "VERB";
    case PartOfSpeech::Adjective: return "ADJ";
    case PartOfSpeech::Adverb: return "ADV";
  }
  return "NOUN";
}

/// Parses framework tags ("NOUN", "VERB", "ADJ", "ADV") and single WordNet
/// letters (n, v, a, s, r). Anything else (DET, PRON, ...) yields nullopt.
inline std::optional<PartOfSpeech> parse_pos_tag(std::string_view tag) {
  if (tag == "NOUN" || tag == "n") return PartOfSpeech::Noun;
  if (tag == "VERB" || tag == "v") return PartOfSpeech::Verb;
  if (tag == "ADJ" || tag == "a" || tag == "s") return PartOfSpeech::Adjective;
  if (tag == "ADV" || tag == "r") return PartOfSpeech::Adverb;
  return std::nullopt;
}

/// WordNet ss_type digit: 1 noun, 2 verb, 3 adjective, 4 adverb, 5 satellite
/// (folded into adjective).
inline std::optional<PartOfSpeech> pos_from_ss_type(char digit) {
  switch (digit) {
    case '1': return PartOfSpeech::Noun;
    case '2': return PartOfSpeech::Verb;
    case '3':
    case '5': return PartOfSpeech::Adjective;
    case '4': return PartOfSpeech::Adverb;
    default: return std::nullopt;
  }
}

struct SenseEntry {
  std::string sense_key;
  std::string lemma;
  PartOfSpeech pos = PartOfSpeech::Noun;
  std::string gloss;
  int sense_rank = 1;

  friend bool operator==(const SenseEntry&, const SenseEntry&) = default;
};

/// Immutable sense inventory. Senses of one (lemma, pos) are kept contiguous
/// and sorted by rank, so candidate lookups hand out a span without copying.
class GlossLexicon {
public:
  using GroupKey = std::pair<std::string, PartOfSpeech>;

  GlossLexicon() = default;

  /// Validates and indexes a batch of entries. Lemmas are normalized
  /// (lowercase, underscores for spaces).
  static GlossLexicon from_entries(std::vector<SenseEntry> entries) {
    GlossLexicon lex;
    for (auto& e : entries) {
      e.lemma = normalize_lemma(e.lemma);
      lex.groups_[{e.lemma, e.pos}].push_back(std::move(e));
    }
    for (auto& [key, senses] : lex.groups_) {
      std::stable_sort(senses.begin(), senses.end(), [](const SenseEntry& a, const SenseEntry& b) {
        return a.sense_rank != b.sense_rank ? a.sense_rank < b.sense_rank : a.sense_key < b.sense_key;
      });
      for (std::size_t i = 0; i < senses.size(); ++i) {
        auto [it, inserted] = lex.by_key_.emplace(senses[i].sense_key, std::make_pair(key, i));
        if (!inserted) throw Error(ErrorKind::DuplicateSenseKey, senses[i].sense_key);
      }
      lex.size_ += senses.size();
    }
    return lex;
  }

  std::size_t size() const noexcept { return size_; }
  bool empty() const noexcept { return size_ == 0; }

  /// Senses of (lemma, pos) in ascending rank; empty span when unknown.
  std::span<const SenseEntry> candidates(std::string_view lemma, PartOfSpeech pos) const {
    auto it = groups_.find({normalize_lemma(lemma), pos});
    if (it == groups_.end()) return {};
    return it->second;
  }

  const SenseEntry* find(std::string_view sense_key) const {
    auto it = by_key_.find(std::string(sense_key));
    if (it == by_key_.end()) return nullptr;
    const auto& [key, index] = it->second;
    return &groups_.at(key)[index];
  }

  const std::map<GroupKey, std::vector<SenseEntry>>& groups() const noexcept { return groups_; }

  friend bool operator==(const GlossLexicon& a, const GlossLexicon& b) { return a.groups_ == b.groups_; }

private:
  std::map<GroupKey, std::vector<SenseEntry>> groups_;
  std::unordered_map<std::string, std::pair<GroupKey, std::size_t>> by_key_;
  std::size_t size_ = 0;
};

inline std::span<const SenseEntry> candidate_senses(const GlossLexicon& lexicon, std::string_view lemma,
                                                    PartOfSpeech pos) {
  return lexicon.candidates(lemma, pos);
}

namespace detail {

[[noreturn]] inline void malformed(const std::string& path, std::size_t line_no, std::string_view line,
                                   std::string_view why) {
  throw Error(ErrorKind::MalformedLine,
              path + ":" + std::to_string(line_no) + ": " + std::string(why) + ": '" + std::string(line) + "'");
}

template <class Int>
std::optional<Int> parse_int(std::string_view s) {
  Int v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace detail

/// Definition part of a WordNet gloss field: everything before the first
/// `;` that is followed (after optional spaces) by a double quote.
inline std::string gloss_definition(std::string_view gloss_field) {
  std::size_t cut = gloss_field.size();
  for (std::size_t i = 0; i < gloss_field.size(); ++i) {
    if (gloss_field[i] != ';') continue;
    std::size_t j = i + 1;
    while (j < gloss_field.size() && gloss_field[j] == ' ') ++j;
    if (j < gloss_field.size() && gloss_field[j] == '"') {
      cut = i;
      break;
    }
  }
  std::string def = normalize_ws(gloss_field.substr(0, cut));
  while (!def.empty() && (def.back() == ';' || def.back() == ' ')) def.pop_back();
  if (def.empty()) def = normalize_ws(gloss_field);  // gloss made only of examples
  return def;
}

/// Maps synset offset to definition text for one `data.<pos>` file.
/// License header lines (leading two spaces) are skipped.
inline std::unordered_map<std::uint64_t, std::string> read_wordnet_data_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path + "'");
  std::unordered_map<std::uint64_t, std::string> glosses;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(std::move(line));
    if (line.empty() || line.starts_with("  ")) continue;
    const auto space = line.find(' ');
    const auto bar = line.find(" | ");
    if (space == std::string::npos || bar == std::string::npos) detail::malformed(path, line_no, line, "no gloss field");
    auto offset = detail::parse_int<std::uint64_t>(std::string_view(line).substr(0, space));
    if (!offset) detail::malformed(path, line_no, line, "bad synset offset");
    std::string def = gloss_definition(std::string_view(line).substr(bar + 3));
    if (def.empty()) detail::malformed(path, line_no, line, "empty gloss");
    glosses.emplace(*offset, std::move(def));
  }
  return glosses;
}

struct WordNetFiles {
  std::string index_sense;
  std::map<PartOfSpeech, std::string> data;

  /// Standard layout of a WordNet `dict/` directory.
  static WordNetFiles from_dir(const std::filesystem::path& dir) {
    WordNetFiles f;
    f.index_sense = (dir / "index.sense").string();
    f.data[PartOfSpeech::Noun] = (dir / "data.noun").string();
    f.data[PartOfSpeech::Verb] = (dir / "data.verb").string();
    f.data[PartOfSpeech::Adjective] = (dir / "data.adj").string();
    f.data[PartOfSpeech::Adverb] = (dir / "data.adv").string();
    return f;
  }
};

/// One entry per `index.sense` line; the gloss comes from the data file of
/// the sense's part of speech.
inline GlossLexicon import_wordnet(const std::string& index_sense_path,
                                   const std::map<PartOfSpeech, std::string>& data_file_paths) {
  std::map<PartOfSpeech, std::unordered_map<std::uint64_t, std::string>> data;
  for (const auto& [pos, path] : data_file_paths) data[pos] = read_wordnet_data_file(path);

  std::ifstream in(index_sense_path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open '" + index_sense_path + "'");
  std::vector<SenseEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(std::move(line));
    if (trim(line).empty()) continue;
    const auto fields = split_ws(line);
    if (fields.size() != 4) detail::malformed(index_sense_path, line_no, line, "expected 4 fields");
    const std::string_view key = fields[0];
    const auto pct = key.find('%');
    if (pct == std::string_view::npos || pct == 0 || pct + 1 >= key.size())
      detail::malformed(index_sense_path, line_no, line, "bad sense key");
    const auto pos = pos_from_ss_type(key[pct + 1]);
    if (!pos) detail::malformed(index_sense_path, line_no, line, "bad ss_type");
    const auto offset = detail::parse_int<std::uint64_t>(fields[1]);
    const auto sense_number = detail::parse_int<int>(fields[2]);
    if (!offset || !sense_number || *sense_number < 1 || !detail::parse_int<int>(fields[3]))
      detail::malformed(index_sense_path, line_no, line, "bad numeric field");

    auto file = data.find(*pos);
    if (file == data.end())
      throw Error(ErrorKind::DanglingOffset, std::string(key) + " -> no data file for " + std::string(pos_tag(*pos)));
    auto gloss = file->second.find(*offset);
    if (gloss == file->second.end())
      throw Error(ErrorKind::DanglingOffset, std::string(key) + " -> missing synset " + std::string(fields[1]));

    entries.push_back(SenseEntry{std::string(key), std::string(key.substr(0, pct)), *pos, gloss->second, *sense_number});
  }
  return GlossLexicon::from_entries(std::move(entries));
}

inline GlossLexicon import_wordnet(const WordNetFiles& files) { return import_wordnet(files.index_sense, files.data); }

/// Fixture format: sense_key TAB lemma TAB pos TAB sense_rank TAB gloss.
inline GlossLexicon parse_tsv_lexicon(std::string_view text, const std::string& origin = "<tsv>") {
  std::vector<SenseEntry> entries;
  std::map<std::tuple<std::string, PartOfSpeech, int>, std::size_t> ranks;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(std::move(line));
    if (line.empty()) continue;
    const auto f = split_char(line, '\t');
    if (f.size() != 5) detail::malformed(origin, line_no, line, "expected 5 tab-separated fields");
    const auto pos = parse_pos_tag(f[2]);
    const auto rank = detail::parse_int<int>(f[3]);
    if (f[0].empty() || f[1].empty()) detail::malformed(origin, line_no, line, "empty key or lemma");
    if (!pos) detail::malformed(origin, line_no, line, "unknown pos");
    if (!rank || *rank < 1) detail::malformed(origin, line_no, line, "bad sense_rank");
    std::string gloss = normalize_ws(f[4]);
    if (gloss.empty()) detail::malformed(origin, line_no, line, "empty gloss");
    if (!ranks.emplace(std::make_tuple(normalize_lemma(f[1]), *pos, *rank), line_no).second)
      detail::malformed(origin, line_no, line, "sense_rank repeated within lemma");
    entries.push_back(SenseEntry{std::string(f[0]), std::string(f[1]), *pos, std::move(gloss), *rank});
  }
  return GlossLexicon::from_entries(std::move(entries));
}

inline GlossLexicon import_tsv_lexicon(const std::string& path) { return parse_tsv_lexicon(read_file(path), path); }

/// Deterministic order: lemma, pos, rank.
inline std::string export_tsv_lexicon(const GlossLexicon& lexicon) {
  std::string out;
  for (const auto& [key, senses] : lexicon.groups()) {
    for (const auto& e : senses) {
      out += e.sense_key;
      out += '\t';
      out += e.lemma;
      out += '\t';
      out += pos_tag(e.pos);
      out += '\t';
      out += std::to_string(e.sense_rank);
      out += '\t';
      out += e.gloss;
      out += '\n';
    }
  }
  return out;
}

}  // namespace lmgc
