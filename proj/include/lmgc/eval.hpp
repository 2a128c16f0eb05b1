#pragma once

#include <array>
#include <cstdio>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "corpus.hpp"
#include "error.hpp"
#include "examples.hpp"
#include "lexicon.hpp"
#include "model.hpp"
#include "tokenizer.hpp"

namespace lmgc {

struct Prediction {
  std::string instance_id;
  std::string sense_key;
  friend bool operator==(const Prediction&, const Prediction&) = default;
};

struct PredictionResult {
  std::vector<Prediction> predictions;  // corpus document order
  std::vector<std::string> skipped;     // instances without candidates
};

/// Index of the largest score; the first (lowest sense rank) wins ties.
inline std::size_t argmax_first(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

/// Parallel route: stacked candidates, softmax, argmax.
inline std::size_t predict_group_parallel(const Model& model, const CandidateGroup& group) {
  std::vector<TokenSequence> seqs;
  for (const auto& p : group.pairs) seqs.push_back(p.sequence);
  const auto probs = score_candidates(model, seqs);
  return argmax_first(probs);
}

/// Sequential route: each pair encoded on its own, argmax of the raw
/// positive logits.
inline std::size_t predict_group_sequential(const Model& model, const CandidateGroup& group) {
  std::vector<double> logits;
  for (const auto& p : group.pairs) logits.push_back(gloss_logits(model.gloss, forward(model, p.sequence).aggregate())(1));
  return argmax_first(logits);
}

inline PredictionResult predict(const Model& model, const WsdCorpus& corpus, const GlossLexicon& lexicon,
                                const Vocabulary& vocab, const BuilderConfig& config) {
  if (vocab.size() != model.config.vocab)
    throw Error(ErrorKind::VocabMismatch, "vocabulary has " + std::to_string(vocab.size()) + " tokens, model expects " +
                                              std::to_string(model.config.vocab));
  PredictionResult out;
  const std::set<std::string> no_gold;
  for (const auto& id : corpus.instance_order()) {
    const auto ref = *corpus.locate(id);
    const CorpusToken& tok = corpus.token(ref);
    std::span<const SenseEntry> candidates;
    if (tok.pos) candidates = lexicon.candidates(tok.lemma.value_or(tok.surface), *tok.pos);
    if (candidates.empty()) {
      out.skipped.push_back(id);
      continue;
    }
    CandidateGroup group;
    group.instance_id = id;
    for (const auto& c : candidates)
      group.pairs.push_back(build_pair(corpus.sentences()[ref.sentence], ref.token, c, no_gold, vocab, config));
    out.predictions.push_back({id, candidates[predict_group_parallel(model, group)].sense_key});
  }
  return out;
}

/// Rank-1 sense of every instance.
inline PredictionResult mfs_baseline(const WsdCorpus& corpus, const GlossLexicon& lexicon) {
  PredictionResult out;
  for (const auto& id : corpus.instance_order()) {
    const CorpusToken& tok = corpus.token(*corpus.locate(id));
    std::span<const SenseEntry> candidates;
    if (tok.pos) candidates = lexicon.candidates(tok.lemma.value_or(tok.surface), *tok.pos);
    if (candidates.empty())
      out.skipped.push_back(id);
    else
      out.predictions.push_back({id, candidates.front().sense_key});
  }
  return out;
}

inline std::string format_predictions(std::span<const Prediction> preds) {
  std::string out;
  for (const auto& p : preds) out += p.instance_id + " " + p.sense_key + "\n";
  return out;
}

inline std::vector<Prediction> parse_predictions(std::string_view text, const std::string& origin = "<predictions>") {
  std::vector<Prediction> preds;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(std::move(line));
    const auto f = split_ws(line);
    if (f.empty()) continue;
    if (f.size() != 2)
      throw Error(ErrorKind::MalformedLine, origin + ":" + std::to_string(line_no) + ": expected 'instance_id sense_key'");
    preds.push_back({std::string(f[0]), std::string(f[1])});
  }
  return preds;
}

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

struct Score {
  std::size_t attempted = 0;
  std::size_t correct = 0;
  std::size_t total = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  void finalize() {
    precision = attempted ? static_cast<double>(correct) / static_cast<double>(attempted) : 0.0;
    recall = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
    f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  }

  Score& operator+=(const Score& o) {
    attempted += o.attempted;
    correct += o.correct;
    total += o.total;
    finalize();
    return *this;
  }

  friend bool operator==(const Score&, const Score&) = default;
};

struct DatasetScore {
  Score all;
  std::map<std::string, Score> by_pos;  // NOUN, VERB, ADJ, ADV
  friend bool operator==(const DatasetScore&, const DatasetScore&) = default;
};

/// Per-dataset scores plus the pooled "All" aggregate.
struct ScoreReport {
  DatasetScore all;
  std::map<std::string, DatasetScore> datasets;
  friend bool operator==(const ScoreReport&, const ScoreReport&) = default;
};

/// Framework scorer semantics: an attempted instance is correct when its
/// predicted key is any of the gold keys.
inline DatasetScore score(std::span<const Prediction> predictions, const GoldKeys& gold, const WsdCorpus& corpus) {
  std::map<std::string, const Prediction*> by_id;
  for (const auto& p : predictions) {
    if (!corpus.locate(p.instance_id)) throw Error(ErrorKind::UnknownInstanceId, p.instance_id);
    if (!by_id.emplace(p.instance_id, &p).second)
      throw Error(ErrorKind::SchemaError, "two predictions for " + p.instance_id);
  }
  DatasetScore ds;
  for (auto pos : kAllPos) ds.by_pos[std::string(pos_tag(pos))];
  for (const auto& id : corpus.instance_order()) {
    auto g = gold.find(id);
    if (g == gold.end()) throw Error(ErrorKind::MissingGold, id);
    const CorpusToken& tok = corpus.token(*corpus.locate(id));
    Score s;
    s.total = 1;
    if (auto p = by_id.find(id); p != by_id.end()) {
      s.attempted = 1;
      s.correct = g->second.count(p->second->sense_key) ? 1 : 0;
    }
    ds.all += s;
    if (tok.pos) ds.by_pos[std::string(pos_tag(*tok.pos))] += s;
  }
  ds.all.finalize();
  for (auto& [k, v] : ds.by_pos) v.finalize();
  return ds;
}

struct DatasetInput {
  std::string name;
  const WsdCorpus* corpus;
  const GoldKeys* gold;
  std::span<const Prediction> predictions;
};

inline ScoreReport score_datasets(std::span<const DatasetInput> inputs) {
  ScoreReport r;
  for (auto pos : kAllPos) r.all.by_pos[std::string(pos_tag(pos))].finalize();
  for (const auto& in : inputs) {
    DatasetScore ds = score(in.predictions, *in.gold, *in.corpus);
    r.all.all += ds.all;
    for (const auto& [pos, s] : ds.by_pos) r.all.by_pos[pos] += s;
    r.datasets[in.name] = std::move(ds);
  }
  r.all.all.finalize();
  return r;
}

/// Table column label for a framework dataset name, e.g. "semeval2007" ->
/// "SE7". Unknown names are returned unchanged.
inline std::string dataset_column(std::string_view name) {
  const std::string n = to_lower_ascii(name);
  if (n == "semeval2007" || n == "se7") return "SE7";
  if (n == "senseval2" || n == "se2") return "SE2";
  if (n == "senseval3" || n == "se3") return "SE3";
  if (n == "semeval2013" || n == "se13") return "SE13";
  if (n == "semeval2015" || n == "se15") return "SE15";
  return std::string(name);
}

inline constexpr std::array<std::string_view, 6> kReportColumns = {"SE7", "SE2", "SE3", "SE13", "SE15", "All"};

inline nlohmann::json to_json(const Score& s) {
  return {{"attempted", s.attempted}, {"correct", s.correct}, {"total", s.total},
          {"precision", s.precision}, {"recall", s.recall},   {"f1", s.f1}};
}

inline Score score_from_json(const nlohmann::json& j) {
  Score s;
  s.attempted = j.at("attempted").get<std::size_t>();
  s.correct = j.at("correct").get<std::size_t>();
  s.total = j.at("total").get<std::size_t>();
  s.precision = j.at("precision").get<double>();
  s.recall = j.at("recall").get<double>();
  s.f1 = j.at("f1").get<double>();
  return s;
}

inline nlohmann::json to_json(const DatasetScore& d) {
  nlohmann::json pos = nlohmann::json::object();
  for (const auto& [k, v] : d.by_pos) pos[k] = to_json(v);
  nlohmann::json j = to_json(d.all);
  j["by_pos"] = pos;
  return j;
}

inline DatasetScore dataset_score_from_json(const nlohmann::json& j) {
  DatasetScore d;
  d.all = score_from_json(j);
  for (const auto& [k, v] : j.at("by_pos").items()) d.by_pos[k] = score_from_json(v);
  return d;
}

inline nlohmann::json to_json(const ScoreReport& r) {
  nlohmann::json ds = nlohmann::json::object();
  for (const auto& [k, v] : r.datasets) ds[k] = to_json(v);
  return {{"All", to_json(r.all)}, {"datasets", ds}};
}

inline ScoreReport report_from_json(const nlohmann::json& j) {
  try {
    ScoreReport r;
    r.all = dataset_score_from_json(j.at("All"));
    for (const auto& [k, v] : j.at("datasets").items()) r.datasets[k] = dataset_score_from_json(v);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaError, std::string("score report: ") + e.what());
  }
}

enum class ReportFormat { Json, Markdown };

/// JSON is the full report. Markdown is an F1 table (percent, one decimal)
/// with columns SE7, SE2, SE3, SE13, SE15, All, followed by a per-POS table
/// of the pooled aggregate.
inline std::string emit_report(const ScoreReport& report, ReportFormat format, std::string_view system = "F1") {
  if (format == ReportFormat::Json) return to_json(report).dump(2) + "\n";
  std::map<std::string, const DatasetScore*> cols;
  for (const auto& [name, ds] : report.datasets) cols[dataset_column(name)] = &ds;
  auto pct = [](double v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.1f", 100.0 * v);
    return std::string(buf);
  };
  std::string out = "| System |";
  for (auto c : kReportColumns) out += " " + std::string(c) + " |";
  out += "\n|---|";
  for (std::size_t i = 0; i < kReportColumns.size(); ++i) out += "---:|";
  out += "\n| " + std::string(system) + " |";
  for (auto c : kReportColumns) {
    double f = 0.0;
    if (c == "All")
      f = report.all.all.f1;
    else if (auto it = cols.find(std::string(c)); it != cols.end())
      f = it->second->all.f1;
    out += " " + pct(f) + " |";
  }
  out += "\n\n| POS | Attempted | Correct | Total | P | R | F1 |\n|---|---:|---:|---:|---:|---:|---:|\n";
  for (auto pos : kAllPos) {
    const std::string tag(pos_tag(pos));
    Score s;
    if (auto it = report.all.by_pos.find(tag); it != report.all.by_pos.end()) s = it->second;
    out += "| " + tag + " | " + std::to_string(s.attempted) + " | " + std::to_string(s.correct) + " | " +
           std::to_string(s.total) + " | " + pct(s.precision) + " | " + pct(s.recall) + " | " + pct(s.f1) + " |\n";
  }
  return out;
}

}  // namespace lmgc
