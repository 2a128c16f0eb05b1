#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "examples.hpp"
#include "model.hpp"
#include "rng.hpp"

namespace lmgc {

inline constexpr double kProbClamp = 1e-12;

struct FocalParams {
  double gamma = 2.0;
  std::optional<double> alpha = 0.25;
};

/// y=1: -a (1-p)^g ln p ; y=0: -(1-a) p^g ln(1-p). Without alpha both
/// class weights are 1. p is clamped to [1e-12, 1 - 1e-12].
inline double focal_loss(double p, int y, const FocalParams& params = {}) {
  p = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  const double a = params.alpha.value_or(1.0);
  if (y == 1) return -a * std::pow(1.0 - p, params.gamma) * std::log(p);
  const double b = params.alpha ? 1.0 - *params.alpha : 1.0;
  return -b * std::pow(p, params.gamma) * std::log1p(-p);
}

/// d focal_loss / dp; zero where the clamp is active.
inline double focal_loss_grad(double p, int y, const FocalParams& params = {}) {
  if (p < kProbClamp || p > 1.0 - kProbClamp) return 0.0;
  const double g = params.gamma;
  if (y == 1) {
    const double a = params.alpha.value_or(1.0);
    const double q = 1.0 - p;
    const double pow_g1 = g == 0.0 ? 0.0 : g * std::pow(q, g - 1.0);
    return a * (pow_g1 * std::log(p) - std::pow(q, g) / p);
  }
  const double b = params.alpha ? 1.0 - *params.alpha : 1.0;
  const double pow_g1 = g == 0.0 ? 0.0 : g * std::pow(p, g - 1.0);
  return -b * (pow_g1 * std::log1p(-p) - std::pow(p, g) / (1.0 - p));
}

inline double binary_cross_entropy(double p, int y) { return y == 1 ? -std::log(p) : -std::log1p(-p); }

/// -ln probabilities[gold].
inline double multichoice_loss(std::span<const double> probabilities, std::size_t gold_index) {
  if (gold_index >= probabilities.size())
    throw Error(ErrorKind::IndexOutOfRange,
                std::to_string(gold_index) + " >= " + std::to_string(probabilities.size()));
  return -std::log(probabilities[gold_index]);
}

inline double log_sum_exp(std::span<const double> xs) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : xs) mx = std::max(mx, x);
  double s = 0.0;
  for (double x : xs) s += std::exp(x - mx);
  return mx + std::log(s);
}

/// Mean softmax cross-entropy over positions; 0 when nothing is masked.
inline double mlm_loss(const Mat& logits, std::span<const TokenId> originals) {
  if (static_cast<std::size_t>(logits.rows()) != originals.size())
    throw Error(ErrorKind::DimensionMismatch, "one original id per masked position required");
  if (originals.empty()) return 0.0;
  double total = 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    const double mx = row.maxCoeff();
    const double lse = mx + std::log((row.array() - mx).exp().sum());
    total += lse - row(originals[static_cast<std::size_t>(r)]);
  }
  return total / static_cast<double>(originals.size());
}

struct LossValue {
  double scalar = 0.0;
  double gloss = 0.0;
  double mlm = 0.0;
};

inline LossValue lmgc_m_loss(std::span<const double> group_probabilities, std::size_t gold_index, const Mat& mlm_logits_,
                             std::span<const TokenId> originals) {
  LossValue v;
  v.gloss = multichoice_loss(group_probabilities, gold_index);
  v.mlm = mlm_loss(mlm_logits_, originals);
  v.scalar = v.gloss + v.mlm;
  return v;
}

// ---------------------------------------------------------------------------
// Losses through the encoder. Each returns the loss of one example and, when
// `grads` is given, adds `weight` x its gradient into it.
// ---------------------------------------------------------------------------

namespace detail {

/// dLoss/d(aggregate row) -> full hidden gradient for backward().
inline Mat aggregate_grad(Eigen::Index n, const RowVec& d_agg) {
  Mat dh = Mat::Zero(n, d_agg.size());
  dh.row(0) = d_agg;
  return dh;
}

inline double stable_sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct MlmTerm {
  double loss_sum = 0.0;
  Mat d_hidden;  // empty when no positions
};

/// Summed CE over this sequence's masked positions; gradient scaled by
/// `scale` (already divided by the group's position count).
inline MlmTerm mlm_term(const Model& model, const Mat& hidden, std::span<const std::size_t> positions,
                        std::span<const TokenId> originals, Model* grads, double scale) {
  MlmTerm t;
  if (positions.empty()) return t;
  const Mat logits = mlm_logits(model, hidden, positions);
  t.loss_sum = mlm_loss(logits, originals) * static_cast<double>(positions.size());
  if (!grads) return t;
  Mat dlogits(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    RowVec e = (logits.row(r).array() - mx).exp();
    dlogits.row(r) = e / e.sum();
    dlogits(r, originals[static_cast<std::size_t>(r)]) -= 1.0;
  }
  dlogits *= scale;
  Mat rows(static_cast<Eigen::Index>(positions.size()), hidden.cols());
  for (std::size_t i = 0; i < positions.size(); ++i)
    rows.row(static_cast<Eigen::Index>(i)) = hidden.row(static_cast<Eigen::Index>(positions[i]));
  grads->encoder.tok_emb.noalias() += dlogits.transpose() * rows;
  grads->encoder.mlm_bias.row(0) += dlogits.colwise().sum();
  const Mat drows = dlogits * model.encoder.tok_emb;
  t.d_hidden = Mat::Zero(hidden.rows(), hidden.cols());
  for (std::size_t i = 0; i < positions.size(); ++i)
    t.d_hidden.row(static_cast<Eigen::Index>(positions[i])) += drows.row(static_cast<Eigen::Index>(i));
  return t;
}

/// Shared path of the multichoice and LMGC-M objectives: stacked candidates
/// scored through the gloss head, optional MLM targets per sequence.
inline LossValue stacked_loss(const Model& model, std::span<const TokenSequence> sequences, std::size_t gold,
                              std::span<const MaskedPosition> masked, Model* grads, Rng* dropout_rng, double weight) {
  const std::size_t k = sequences.size();
  if (k == 0) throw Error(ErrorKind::EmptyDataset, "group without candidates");
  if (gold >= k) throw Error(ErrorKind::IndexOutOfRange, "gold index " + std::to_string(gold));
  std::vector<ForwardCache> caches(grads ? k : 0);
  std::vector<Mat> hidden(k);
  std::vector<double> scores(k);
  for (std::size_t i = 0; i < k; ++i) {
    hidden[i] = forward(model, sequences[i], dropout_rng, grads ? &caches[i] : nullptr).hidden;
    scores[i] = gloss_logits(model.gloss, hidden[i].row(0))(1);
  }
  LossValue v;
  v.gloss = log_sum_exp(scores) - scores[gold];

  const double mlm_scale = masked.empty() ? 0.0 : weight / static_cast<double>(masked.size());
  std::vector<std::vector<std::size_t>> pos(k);
  std::vector<std::vector<TokenId>> orig(k);
  for (const auto& m : masked) {
    if (m.pair >= k) throw Error(ErrorKind::PositionOutOfRange, "masked pair index " + std::to_string(m.pair));
    pos[m.pair].push_back(m.token);
    orig[m.pair].push_back(m.original);
  }
  std::vector<MlmTerm> mlm(k);
  double mlm_sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    mlm[i] = mlm_term(model, hidden[i], pos[i], orig[i], grads, mlm_scale);
    mlm_sum += mlm[i].loss_sum;
  }
  v.mlm = masked.empty() ? 0.0 : mlm_sum / static_cast<double>(masked.size());
  v.scalar = v.gloss + v.mlm;
  if (!grads) return v;

  const auto probs = softmax(scores);
  for (std::size_t i = 0; i < k; ++i) {
    const double dscore = weight * (probs[i] - (i == gold ? 1.0 : 0.0));
    const RowVec agg = hidden[i].row(0);
    grads->gloss.weight.col(1) += agg.transpose() * dscore;
    grads->gloss.bias(0, 1) += dscore;
    Mat dh = aggregate_grad(hidden[i].rows(), model.gloss.weight.col(1).transpose() * dscore);
    if (mlm[i].d_hidden.size() != 0) dh += mlm[i].d_hidden;
    backward(model, caches[i], dh, *grads);
  }
  return v;
}

}  // namespace detail

/// Softmax cross-entropy over the k stacked candidates of one group.
inline double group_multichoice_loss(const Model& model, std::span<const TokenSequence> sequences, std::size_t gold,
                                     Model* grads = nullptr, Rng* dropout_rng = nullptr, double weight = 1.0) {
  return detail::stacked_loss(model, sequences, gold, {}, grads, dropout_rng, weight).scalar;
}

inline std::vector<TokenSequence> group_sequences(const CandidateGroup& g) {
  std::vector<TokenSequence> seqs;
  seqs.reserve(g.pairs.size());
  for (const auto& p : g.pairs) seqs.push_back(p.sequence);
  return seqs;
}

/// Multichoice term on the masked sequences plus the mean MLM cross-entropy
/// over every masked position of the group.
inline LossValue group_lmgc_m_loss(const Model& model, const MaskedGroup& g, Model* grads = nullptr,
                                   Rng* dropout_rng = nullptr, double weight = 1.0) {
  return detail::stacked_loss(model, g.masked_sequences, g.base.primary_gold, g.masked_positions, grads, dropout_rng,
                              weight);
}

/// Focal loss of one pair under the binary (sequential) formulation, with
/// p = softmax(gloss logits)[positive].
inline double pair_focal_loss(const Model& model, const TokenSequence& seq, bool label, const FocalParams& fp,
                              Model* grads = nullptr, Rng* dropout_rng = nullptr, double weight = 1.0) {
  ForwardCache cache;
  const Mat hidden = forward(model, seq, dropout_rng, grads ? &cache : nullptr).hidden;
  const RowVec agg = hidden.row(0);
  const RowVec logits = gloss_logits(model.gloss, agg);
  const double p = detail::stable_sigmoid(logits(1) - logits(0));
  const int y = label ? 1 : 0;
  const double loss = focal_loss(p, y, fp);
  if (!grads) return loss;
  const double dz = weight * focal_loss_grad(p, y, fp) * p * (1.0 - p);
  grads->gloss.weight.col(1) += agg.transpose() * dz;
  grads->gloss.weight.col(0) -= agg.transpose() * dz;
  grads->gloss.bias(0, 1) += dz;
  grads->gloss.bias(0, 0) -= dz;
  const RowVec dagg = (model.gloss.weight.col(1) - model.gloss.weight.col(0)).transpose() * dz;
  backward(model, cache, detail::aggregate_grad(hidden.rows(), dagg), *grads);
  return loss;
}

/// Cross-entropy (classification, label = class index) or squared error
/// (regression) through the model's downstream head.
inline double downstream_loss(const Model& model, const TokenSequence& seq, double label, Model* grads = nullptr,
                              Rng* dropout_rng = nullptr, double weight = 1.0) {
  if (!model.downstream) throw Error(ErrorKind::InvalidConfig, "model has no downstream head");
  const auto& head = *model.downstream;
  ForwardCache cache;
  const Mat hidden = forward(model, seq, dropout_rng, grads ? &cache : nullptr).hidden;
  const RowVec agg = hidden.row(0);
  const RowVec out = head_output(head, agg);
  RowVec dout(out.size());
  double loss = 0.0;
  if (head.kind == HeadKind::Classification) {
    const auto cls = static_cast<long>(label);
    if (cls < 0 || cls >= out.size() || static_cast<double>(cls) != label)
      throw Error(ErrorKind::LabelOutOfRange, std::to_string(label));
    std::vector<double> logits(out.data(), out.data() + out.size());
    loss = log_sum_exp(logits) - logits[static_cast<std::size_t>(cls)];
    const auto probs = softmax(logits);
    for (Eigen::Index i = 0; i < out.size(); ++i) dout(i) = probs[static_cast<std::size_t>(i)] - (i == cls ? 1.0 : 0.0);
  } else {
    const double r = out(0) - label;
    loss = r * r;
    dout(0) = 2.0 * r;
  }
  if (!grads) return loss;
  dout *= weight;
  grads->downstream->weight.noalias() += dout.transpose() * agg;
  grads->downstream->bias.row(0) += dout;
  backward(model, cache, detail::aggregate_grad(hidden.rows(), dout * head.weight), *grads);
  return loss;
}

// ---------------------------------------------------------------------------
// Gradient check
// ---------------------------------------------------------------------------

struct GradcheckEntry {
  std::string tensor;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct GradcheckReport {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  double epsilon = 0.0;
  double denominator_floor = 0.0;
  std::vector<GradcheckEntry> worst;  // descending rel_err

  nlohmann::json to_json() const {
    nlohmann::json w = nlohmann::json::array();
    for (const auto& e : worst)
      w.push_back({{"coordinate", e.tensor + "[" + std::to_string(e.index) + "]"},
                   {"analytic", e.analytic},
                   {"numeric", e.numeric},
                   {"rel_err", e.rel_err}});
    return {{"max_rel_err", max_rel_err},
            {"checked", checked},
            {"epsilon", epsilon},
            {"denominator_floor", denominator_floor},
            {"worst", w}};
  }
};

/// Loss closure: returns the loss at `model` and, when the second argument
/// is non-null, accumulates the analytic gradient into it.
using LossClosure = std::function<double(const Model&, Model*)>;

/// Compares analytic gradients with central differences on sampled
/// coordinates. Samples are spread evenly across tensors so every parameter
/// group is exercised. Relative error is |a - n| / max(|a|, |n|, floor);
/// the floor keeps round-off on vanishing gradients from dominating.
inline GradcheckReport gradcheck(Model& model, const LossClosure& loss, double epsilon = 1e-5,
                                 std::size_t sample_size = 500, std::uint64_t seed = 0,
                                 double denominator_floor = 1e-6, std::size_t keep_worst = 10) {
  Model grads = zeros_like(model);
  loss(model, &grads);

  struct Slot {
    std::string name;
    Mat* param;
    const Mat* grad;
  };
  std::vector<Slot> slots;
  for_each_param(model, [&](const std::string& name, Mat& m, bool) { slots.push_back({name, &m, nullptr}); });
  std::size_t i = 0;
  for_each_param(grads, [&](const std::string&, const Mat& m, bool) { slots[i++].grad = &m; });

  Rng rng(seed);
  GradcheckReport report;
  report.epsilon = epsilon;
  report.denominator_floor = denominator_floor;
  std::vector<GradcheckEntry> all;
  // budget split evenly, smallest tensors first
  std::vector<std::size_t> by_size(slots.size()), quota(slots.size());
  for (std::size_t t = 0; t < slots.size(); ++t) by_size[t] = t;
  std::stable_sort(by_size.begin(), by_size.end(),
                   [&](std::size_t a, std::size_t b) { return slots[a].param->size() < slots[b].param->size(); });
  std::size_t remaining = sample_size;
  for (std::size_t r = 0; r < by_size.size(); ++r) {
    const std::size_t left = by_size.size() - r;
    const auto n = static_cast<std::size_t>(slots[by_size[r]].param->size());
    quota[by_size[r]] = std::min(n, (remaining + left - 1) / left);
    remaining -= std::min(remaining, quota[by_size[r]]);
  }
  for (std::size_t t = 0; t < slots.size(); ++t) {
    const auto& s = slots[t];
    const auto n = static_cast<std::size_t>(s.param->size());
    const std::size_t per_tensor = quota[t];
    std::vector<std::size_t> coords;
    if (n <= per_tensor) {
      for (std::size_t c = 0; c < n; ++c) coords.push_back(c);
    } else {
      for (std::size_t c = 0; c < per_tensor; ++c) coords.push_back(static_cast<std::size_t>(rng.below(n)));
    }
    for (auto c : coords) {
      double& theta = s.param->data()[c];
      const double saved = theta;
      theta = saved + epsilon;
      const double fp = loss(model, nullptr);
      theta = saved - epsilon;
      const double fm = loss(model, nullptr);
      theta = saved;
      const double numeric = (fp - fm) / (2.0 * epsilon);
      const double analytic = s.grad->data()[c];
      if (!std::isfinite(numeric) || !std::isfinite(analytic))
        throw Error(ErrorKind::NonFiniteGradient, s.name + "[" + std::to_string(c) + "]");
      const double denom = std::max({std::abs(analytic), std::abs(numeric), denominator_floor});
      all.push_back({s.name, c, analytic, numeric, std::abs(analytic - numeric) / denom});
    }
  }
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.rel_err > b.rel_err; });
  report.checked = all.size();
  report.max_rel_err = all.empty() ? 0.0 : all.front().rel_err;
  all.resize(std::min(all.size(), keep_worst));
  report.worst = std::move(all);
  return report;
}

}  // namespace lmgc
