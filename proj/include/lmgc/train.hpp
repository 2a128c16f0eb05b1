#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "examples.hpp"
#include "model.hpp"
#include "objectives.hpp"
#include "optim.hpp"
#include "rng.hpp"

namespace lmgc {

enum class TrainMode { LmgcBinary, LmgcMultichoice, LmgcM, Downstream };

inline std::string_view to_string(TrainMode m) {
  switch (m) {
    case TrainMode::LmgcBinary: return "lmgc_binary";
    case TrainMode::LmgcMultichoice: return "lmgc_multichoice";
    case TrainMode::LmgcM: return "lmgc_m";
    case TrainMode::Downstream: return "downstream";
  }
  return "lmgc_multichoice";
}

/// Accepts both underscore and dash spellings.
inline TrainMode parse_train_mode(std::string s) {
  std::replace(s.begin(), s.end(), '-', '_');
  if (s == "lmgc_binary") return TrainMode::LmgcBinary;
  if (s == "lmgc_multichoice" || s == "lmgc") return TrainMode::LmgcMultichoice;
  if (s == "lmgc_m") return TrainMode::LmgcM;
  if (s == "downstream") return TrainMode::Downstream;
  throw Error(ErrorKind::InvalidConfig, "unknown training mode '" + s + "'");
}

struct TrainConfig {
  std::size_t batch_size = 32;  // groups per step (multichoice, lmgc_m); pairs per step (binary)
  double lr = 2e-5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.01;
  std::size_t epochs = 3;
  TrainMode mode = TrainMode::LmgcMultichoice;
  std::uint64_t seed = 0;
  std::string validation_split = "semeval2007";
  double focal_gamma = 2.0;
  std::optional<double> focal_alpha = 0.25;

  void validate() const {
    if (batch_size == 0) throw Error(ErrorKind::InvalidConfig, "batch_size must be positive");
    if (!(lr > 0.0) || !(adam_eps > 0.0) || weight_decay < 0.0)
      throw Error(ErrorKind::InvalidConfig, "lr and adam_eps must be positive, weight_decay non-negative");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0))
      throw Error(ErrorKind::InvalidConfig, "adam betas must lie in [0, 1)");
  }

  AdamWConfig adamw() const { return {lr, adam_beta1, adam_beta2, adam_eps, weight_decay}; }
  FocalParams focal() const { return {focal_gamma, focal_alpha}; }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"batch_size", c.batch_size},
       {"lr", c.lr},
       {"adam_beta1", c.adam_beta1},
       {"adam_beta2", c.adam_beta2},
       {"adam_eps", c.adam_eps},
       {"weight_decay", c.weight_decay},
       {"epochs", c.epochs},
       {"mode", to_string(c.mode)},
       {"seed", c.seed},
       {"validation_split", c.validation_split},
       {"focal_gamma", c.focal_gamma},
       {"focal_alpha", c.focal_alpha ? nlohmann::json(*c.focal_alpha) : nlohmann::json(nullptr)}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  static const std::set<std::string> known = {"batch_size", "lr",     "adam_beta1", "adam_beta2",
                                              "adam_eps",   "weight_decay", "epochs", "mode",
                                              "seed",       "validation_split", "focal_gamma", "focal_alpha"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw Error(ErrorKind::InvalidConfig, "unknown TrainConfig field '" + k + "'");
  TrainConfig d;
  c.batch_size = j.value("batch_size", d.batch_size);
  c.lr = j.value("lr", d.lr);
  c.adam_beta1 = j.value("adam_beta1", d.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", d.adam_beta2);
  c.adam_eps = j.value("adam_eps", d.adam_eps);
  c.weight_decay = j.value("weight_decay", d.weight_decay);
  c.epochs = j.value("epochs", d.epochs);
  c.mode = j.contains("mode") ? parse_train_mode(j.at("mode").get<std::string>()) : d.mode;
  c.seed = j.value("seed", d.seed);
  c.validation_split = j.value("validation_split", d.validation_split);
  c.focal_gamma = j.value("focal_gamma", d.focal_gamma);
  if (j.contains("focal_alpha"))
    c.focal_alpha = j.at("focal_alpha").is_null() ? std::nullopt : std::optional<double>(j.at("focal_alpha").get<double>());
}

struct EpochMetrics {
  std::size_t epoch = 0;
  std::optional<double> train_loss;  // absent for the initial evaluation
  double val_loss = 0.0;
  std::optional<double> train_gloss, train_mlm;
  std::optional<double> val_gloss, val_mlm;

  friend bool operator==(const EpochMetrics&, const EpochMetrics&) = default;
};

struct StepTrace {
  double total = 0.0;
  double gloss = 0.0;
  double mlm = 0.0;
  friend bool operator==(const StepTrace&, const StepTrace&) = default;
};

struct TrainReport {
  std::vector<EpochMetrics> epochs;  // epochs[0] is the pre-training evaluation
  std::size_t selected_epoch = 0;
  std::vector<StepTrace> steps;  // LMGC-M only
  double wall_seconds = 0.0;     // excluded from equality

  friend bool operator==(const TrainReport& a, const TrainReport& b) {
    return a.epochs == b.epochs && a.selected_epoch == b.selected_epoch && a.steps == b.steps;
  }
};

inline nlohmann::json to_json(const EpochMetrics& m) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json j = {{"epoch", m.epoch}, {"train_loss", opt(m.train_loss)}, {"val_loss", m.val_loss}};
  if (m.val_mlm) {
    j["train_gloss"] = opt(m.train_gloss);
    j["train_mlm"] = opt(m.train_mlm);
    j["val_gloss"] = opt(m.val_gloss);
    j["val_mlm"] = opt(m.val_mlm);
  }
  return j;
}

inline nlohmann::json to_json(const TrainReport& r) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : r.epochs) epochs.push_back(to_json(e));
  return {{"epochs", epochs}, {"selected_epoch", r.selected_epoch}, {"steps", r.steps.size()},
          {"wall_seconds", r.wall_seconds}};
}

struct TrainResult {
  TrainReport report;
  Model best;   // parameters at the selected epoch
  Model final;  // parameters after the last epoch
};

/// Run-directory writer: config.json, metrics.jsonl, epoch_N.ckpt, best.ckpt.
class RunDir {
public:
  explicit RunDir(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

  void write_config(const TrainConfig& tc, const ModelConfig& mc) const {
    nlohmann::json j = tc;
    j["model"] = mc;
    write_file((dir_ / "config.json").string(), j.dump(2) + "\n");
    write_file((dir_ / "metrics.jsonl").string(), "");
  }
  void append_metrics(const EpochMetrics& m) const {
    std::ofstream out(dir_ / "metrics.jsonl", std::ios::app | std::ios::binary);
    out << to_json(m).dump() << '\n';
  }
  void save_epoch(const Model& m, std::size_t epoch) const {
    save_checkpoint(m, (dir_ / ("epoch_" + std::to_string(epoch) + ".ckpt")).string());
  }
  void save_best(const Model& m) const { save_checkpoint(m, (dir_ / "best.ckpt").string()); }
  const std::filesystem::path& path() const noexcept { return dir_; }

private:
  std::filesystem::path dir_;
};

namespace detail {

/// Generic epoch loop. `step_loss(model, index, grads, rng, weight)` handles
/// one training example; `evaluate(model)` returns the mean validation loss.
inline TrainResult run_training(Model model, std::size_t n_train, const TrainConfig& cfg,
                                const std::function<LossValue(const Model&, std::size_t, Model*, Rng*, double)>& step_loss,
                                const std::function<LossValue(const Model&)>& evaluate, bool trace_components,
                                const RunDir* run_dir) {
  cfg.validate();
  if (n_train == 0) throw Error(ErrorKind::EmptyDataset, "no training examples");
  const auto t0 = std::chrono::steady_clock::now();
  if (run_dir) run_dir->write_config(cfg, model.config);

  TrainResult result{{}, model, model};
  auto& report = result.report;
  const LossValue v0 = evaluate(model);
  EpochMetrics m0;
  m0.val_loss = v0.scalar;
  if (trace_components) {
    m0.val_gloss = v0.gloss;
    m0.val_mlm = v0.mlm;
  }
  report.epochs.push_back(m0);
  if (run_dir) run_dir->append_metrics(m0);
  double best_val = v0.scalar;

  AdamW opt(model, cfg.adamw());
  Rng dropout_rng(hash_combine(cfg.seed, fnv1a64("dropout")));
  std::vector<std::size_t> order(n_train);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < n_train; ++i) order[i] = i;
    Rng shuffle_rng(hash_combine(cfg.seed, epoch));
    shuffle_rng.shuffle(std::span<std::size_t>(order));

    double sum = 0.0, sum_gloss = 0.0, sum_mlm = 0.0;
    for (std::size_t start = 0; start < n_train; start += cfg.batch_size) {
      const std::size_t end = std::min(n_train, start + cfg.batch_size);
      const double weight = 1.0 / static_cast<double>(end - start);
      Model grads = zeros_like(model);
      StepTrace trace;
      for (std::size_t b = start; b < end; ++b) {
        const LossValue lv = step_loss(model, order[b], &grads, &dropout_rng, weight);
        trace.total += lv.scalar * weight;
        trace.gloss += lv.gloss * weight;
        trace.mlm += lv.mlm * weight;
        sum += lv.scalar;
        sum_gloss += lv.gloss;
        sum_mlm += lv.mlm;
      }
      opt.step(model, grads);
      if (trace_components) report.steps.push_back(trace);
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = sum / static_cast<double>(n_train);
    const LossValue v = evaluate(model);
    m.val_loss = v.scalar;
    if (trace_components) {
      m.train_gloss = sum_gloss / static_cast<double>(n_train);
      m.train_mlm = sum_mlm / static_cast<double>(n_train);
      m.val_gloss = v.gloss;
      m.val_mlm = v.mlm;
    }
    report.epochs.push_back(m);
    if (run_dir) {
      run_dir->append_metrics(m);
      run_dir->save_epoch(model, epoch);
    }
    if (v.scalar < best_val) {
      best_val = v.scalar;
      report.selected_epoch = epoch;
      result.best = model;
    }
  }
  if (run_dir) run_dir->save_best(result.best);
  result.final = std::move(model);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

inline LossValue mean_loss(std::size_t n, const std::function<LossValue(std::size_t)>& f) {
  if (n == 0) throw Error(ErrorKind::EmptyDataset, "no validation examples");
  LossValue acc;
  for (std::size_t i = 0; i < n; ++i) {
    const LossValue v = f(i);
    acc.scalar += v.scalar;
    acc.gloss += v.gloss;
    acc.mlm += v.mlm;
  }
  const double d = static_cast<double>(n);
  return {acc.scalar / d, acc.gloss / d, acc.mlm / d};
}

struct FlatPair {
  const TokenSequence* seq;
  bool label;
};

inline std::vector<FlatPair> flatten(std::span<const CandidateGroup> groups) {
  std::vector<FlatPair> out;
  for (const auto& g : groups)
    for (const auto& p : g.pairs) out.push_back({&p.sequence, p.label});
  return out;
}

}  // namespace detail

/// LMGC fine-tuning. Multichoice mode: softmax cross-entropy over each
/// group's stacked candidates against primary_gold. Binary mode: focal loss
/// on individual pairs.
inline TrainResult train_lmgc(std::span<const CandidateGroup> train, std::span<const CandidateGroup> validation,
                              const Model& model, const TrainConfig& cfg, const RunDir* run_dir = nullptr) {
  if (train.empty()) throw Error(ErrorKind::EmptyDataset, "no training groups");
  if (validation.empty()) throw Error(ErrorKind::EmptyDataset, "no validation groups");
  if (cfg.mode == TrainMode::LmgcBinary) {
    auto tr = detail::flatten(train);
    auto va = detail::flatten(validation);
    const FocalParams fp = cfg.focal();
    return detail::run_training(
        model, tr.size(), cfg,
        [&](const Model& m, std::size_t i, Model* g, Rng* rng, double w) {
          const double l = pair_focal_loss(m, *tr[i].seq, tr[i].label, fp, g, rng, w);
          return LossValue{l, l, 0.0};
        },
        [&](const Model& m) {
          return detail::mean_loss(va.size(), [&](std::size_t i) {
            const double l = pair_focal_loss(m, *va[i].seq, va[i].label, fp);
            return LossValue{l, l, 0.0};
          });
        },
        false, run_dir);
  }
  if (cfg.mode != TrainMode::LmgcMultichoice)
    throw Error(ErrorKind::InvalidConfig, "train_lmgc expects lmgc_binary or lmgc_multichoice");
  std::vector<std::vector<TokenSequence>> tr, va;
  for (const auto& g : train) tr.push_back(group_sequences(g));
  for (const auto& g : validation) va.push_back(group_sequences(g));
  return detail::run_training(
      model, train.size(), cfg,
      [&](const Model& m, std::size_t i, Model* g, Rng* rng, double w) {
        const double l = group_multichoice_loss(m, tr[i], train[i].primary_gold, g, rng, w);
        return LossValue{l, l, 0.0};
      },
      [&](const Model& m) {
        return detail::mean_loss(va.size(), [&](std::size_t i) {
          const double l = group_multichoice_loss(m, va[i], validation[i].primary_gold);
          return LossValue{l, l, 0.0};
        });
      },
      false, run_dir);
}

/// Joint LMGC + context-restricted MLM on pre-masked groups. Selection uses
/// the combined validation loss.
inline TrainResult pretrain_lmgc_m(std::span<const MaskedGroup> train, std::span<const MaskedGroup> validation,
                                   const Model& model, const TrainConfig& cfg, const RunDir* run_dir = nullptr) {
  if (train.empty()) throw Error(ErrorKind::EmptyDataset, "no training groups");
  if (validation.empty()) throw Error(ErrorKind::EmptyDataset, "no validation groups");
  return detail::run_training(
      model, train.size(), cfg,
      [&](const Model& m, std::size_t i, Model* g, Rng* rng, double w) { return group_lmgc_m_loss(m, train[i], g, rng, w); },
      [&](const Model& m) {
        return detail::mean_loss(validation.size(), [&](std::size_t i) { return group_lmgc_m_loss(m, validation[i]); });
      },
      true, run_dir);
}

/// Continues an LMGC-M checkpoint in multichoice mode on unmasked groups.
/// `expected` is the architecture the caller intends to fine-tune.
inline TrainResult finetune_without_masks(const Model& checkpoint, const ModelConfig& expected,
                                          std::span<const CandidateGroup> train,
                                          std::span<const CandidateGroup> validation, TrainConfig cfg,
                                          const RunDir* run_dir = nullptr) {
  if (!checkpoint.config.same_shape(expected))
    throw Error(ErrorKind::CheckpointIncompatible,
                "checkpoint H=" + std::to_string(checkpoint.config.hidden) + " L=" +
                    std::to_string(checkpoint.config.layers) + " vs expected H=" + std::to_string(expected.hidden) +
                    " L=" + std::to_string(expected.layers));
  cfg.mode = TrainMode::LmgcMultichoice;
  return train_lmgc(train, validation, checkpoint, cfg, run_dir);
}

struct LabeledSequence {
  TokenSequence sequence;
  double label = 0.0;  // class index, or regression target
};

struct HeadSpec {
  HeadKind kind = HeadKind::Classification;
  std::size_t classes = 2;
};

/// Trains the encoder together with a freshly initialized W (K x H) or
/// V (1 x H) head on the aggregate state.
inline TrainResult finetune_downstream(const Model& checkpoint, std::span<const LabeledSequence> train,
                                       std::span<const LabeledSequence> validation, const HeadSpec& head,
                                       TrainConfig cfg, const RunDir* run_dir = nullptr) {
  if (train.empty() || validation.empty()) throw Error(ErrorKind::EmptyDataset, "downstream data missing");
  cfg.mode = TrainMode::Downstream;
  Model model = checkpoint;
  Rng head_rng(hash_combine(cfg.seed, fnv1a64("downstream-head")));
  model.downstream = make_downstream_head(head.kind, model.config.hidden, head.classes, head_rng);
  for (const auto* set : {&train, &validation})
    for (const auto& ex : *set)
      if (head.kind == HeadKind::Classification &&
          (ex.label < 0 || ex.label >= static_cast<double>(head.classes) || std::floor(ex.label) != ex.label))
        throw Error(ErrorKind::LabelOutOfRange, std::to_string(ex.label));
  return detail::run_training(
      model, train.size(), cfg,
      [&](const Model& m, std::size_t i, Model* g, Rng* rng, double w) {
        const double l = downstream_loss(m, train[i].sequence, train[i].label, g, rng, w);
        return LossValue{l, l, 0.0};
      },
      [&](const Model& m) {
        return detail::mean_loss(validation.size(), [&](std::size_t i) {
          const double l = downstream_loss(m, validation[i].sequence, validation[i].label);
          return LossValue{l, l, 0.0};
        });
      },
      false, run_dir);
}

}  // namespace lmgc
