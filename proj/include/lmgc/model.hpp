#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "error.hpp"
#include "rng.hpp"
#include "tokenizer.hpp"

namespace lmgc {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;

struct ModelConfig {
  std::size_t layers = 2;
  std::size_t hidden = 32;
  std::size_t heads = 2;
  std::size_t ff = 64;
  std::size_t vocab = kSpecialCount + 1;
  std::size_t max_positions = 160;
  std::size_t segments = 2;
  double dropout = 0.2;
  std::uint64_t seed = 0;

  void validate() const {
    if (layers == 0 || hidden == 0 || heads == 0 || ff == 0)
      throw Error(ErrorKind::InvalidConfig, "layers, hidden, heads and ff must be positive");
    if (hidden % heads != 0)
      throw Error(ErrorKind::InvalidConfig,
                  "hidden " + std::to_string(hidden) + " not divisible by heads " + std::to_string(heads));
    if (vocab <= kSpecialCount) throw Error(ErrorKind::InvalidConfig, "vocab must exceed the special tokens");
    if (max_positions < 8) throw Error(ErrorKind::InvalidConfig, "max_positions must be >= 8");
    if (segments < 2) throw Error(ErrorKind::InvalidConfig, "need two segments");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorKind::InvalidConfig, "dropout must lie in [0, 1)");
  }

  /// Shape-determining fields only; dropout and seed do not affect layout.
  bool same_shape(const ModelConfig& o) const {
    return layers == o.layers && hidden == o.hidden && heads == o.heads && ff == o.ff && vocab == o.vocab &&
           max_positions == o.max_positions && segments == o.segments;
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"layers", c.layers}, {"hidden", c.hidden}, {"heads", c.heads},     {"ff", c.ff},
       {"vocab", c.vocab},   {"max_positions", c.max_positions},           {"segments", c.segments},
       {"dropout", c.dropout}, {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.layers = j.value("layers", d.layers);
  c.hidden = j.value("hidden", d.hidden);
  c.heads = j.value("heads", d.heads);
  c.ff = j.value("ff", d.ff);
  c.vocab = j.value("vocab", d.vocab);
  c.max_positions = j.value("max_positions", d.max_positions);
  c.segments = j.value("segments", d.segments);
  c.dropout = j.value("dropout", d.dropout);
  c.seed = j.value("seed", d.seed);
}

struct LayerParams {
  Mat wq, bq, wk, bk, wv, bv, wo, bo;
  Mat ln1_g, ln1_b;
  Mat w1, b1, w2, b2;
  Mat ln2_g, ln2_b;
};

/// Encoder plus the tied MLM output bias. The MLM projection reuses the
/// token embedding table.
struct EncoderParams {
  Mat tok_emb, pos_emb, seg_emb;
  Mat emb_ln_g, emb_ln_b;
  std::vector<LayerParams> layers;
  Mat mlm_bias;
};

/// Positive/negative logit layer on the aggregate state: 2H + 2 parameters.
struct GlossHead {
  Mat weight;  // H x 2, column 1 is the "gloss matches" logit
  Mat bias;    // 1 x 2
};

enum class HeadKind { Classification, Regression };

/// W (K x H) + K biases for classification, V (1 x H) + 1 bias for regression.
struct DownstreamHead {
  HeadKind kind = HeadKind::Classification;
  Mat weight;
  Mat bias;

  std::size_t outputs() const { return static_cast<std::size_t>(weight.rows()); }
};

struct Model {
  ModelConfig config;
  EncoderParams encoder;
  GlossHead gloss;
  std::optional<DownstreamHead> downstream;
};

/// Visits every tensor in declaration order as f(name, matrix, decays).
/// `decays` is false for biases and layer-norm parameters.
template <class M, class F>
void for_each_param(M& model, F&& f) {
  auto& e = model.encoder;
  f("embeddings.token", e.tok_emb, true);
  f("embeddings.position", e.pos_emb, true);
  f("embeddings.segment", e.seg_emb, true);
  f("embeddings.ln.gamma", e.emb_ln_g, false);
  f("embeddings.ln.beta", e.emb_ln_b, false);
  for (std::size_t i = 0; i < e.layers.size(); ++i) {
    auto& l = e.layers[i];
    const std::string p = "layer" + std::to_string(i) + ".";
    f(p + "attn.q.weight", l.wq, true);
    f(p + "attn.q.bias", l.bq, false);
    f(p + "attn.k.weight", l.wk, true);
    f(p + "attn.k.bias", l.bk, false);
    f(p + "attn.v.weight", l.wv, true);
    f(p + "attn.v.bias", l.bv, false);
    f(p + "attn.out.weight", l.wo, true);
    f(p + "attn.out.bias", l.bo, false);
    f(p + "ln1.gamma", l.ln1_g, false);
    f(p + "ln1.beta", l.ln1_b, false);
    f(p + "ff.in.weight", l.w1, true);
    f(p + "ff.in.bias", l.b1, false);
    f(p + "ff.out.weight", l.w2, true);
    f(p + "ff.out.bias", l.b2, false);
    f(p + "ln2.gamma", l.ln2_g, false);
    f(p + "ln2.beta", l.ln2_b, false);
  }
  f("mlm.bias", e.mlm_bias, false);
  f("gloss_head.weight", model.gloss.weight, true);
  f("gloss_head.bias", model.gloss.bias, false);
  if (model.downstream) {
    f("downstream.weight", model.downstream->weight, true);
    f("downstream.bias", model.downstream->bias, false);
  }
}

inline std::size_t parameter_count(const Model& model) {
  std::size_t n = 0;
  for_each_param(model, [&](const std::string&, const Mat& m, bool) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

inline std::size_t parameter_count(const GlossHead& h) { return static_cast<std::size_t>(h.weight.size() + h.bias.size()); }
inline std::size_t parameter_count(const DownstreamHead& h) {
  return static_cast<std::size_t>(h.weight.size() + h.bias.size());
}

/// Encoder + tied MLM stack without any task head.
inline std::size_t encoder_parameter_count(const Model& model) {
  return parameter_count(model) - parameter_count(model.gloss) -
         (model.downstream ? parameter_count(*model.downstream) : 0);
}

namespace detail {

inline Mat normal_mat(std::size_t rows, std::size_t cols, Rng& rng, double stddev = 0.02) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(stddev);
  return m;
}

inline Mat zeros(std::size_t rows, std::size_t cols) { return Mat::Zero(rows, cols); }
inline Mat ones(std::size_t rows, std::size_t cols) { return Mat::Ones(rows, cols); }

}  // namespace detail

inline DownstreamHead make_downstream_head(HeadKind kind, std::size_t hidden, std::size_t classes, Rng& rng) {
  if (kind == HeadKind::Classification && classes < 2)
    throw Error(ErrorKind::InvalidConfig, "classification head needs K >= 2");
  const std::size_t k = kind == HeadKind::Regression ? 1 : classes;
  return DownstreamHead{kind, detail::normal_mat(k, hidden, rng), detail::zeros(1, k)};
}

/// Zero-mean normal weights with stddev 0.02, unit layer-norm scales,
/// zero offsets and biases. Deterministic in `config.seed`.
inline Model init_params(const ModelConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const std::size_t H = config.hidden, F = config.ff;
  Model m;
  m.config = config;
  auto& e = m.encoder;
  e.tok_emb = detail::normal_mat(config.vocab, H, rng);
  e.pos_emb = detail::normal_mat(config.max_positions, H, rng);
  e.seg_emb = detail::normal_mat(config.segments, H, rng);
  e.emb_ln_g = detail::ones(1, H);
  e.emb_ln_b = detail::zeros(1, H);
  for (std::size_t i = 0; i < config.layers; ++i) {
    LayerParams l;
    l.wq = detail::normal_mat(H, H, rng);
    l.bq = detail::zeros(1, H);
    l.wk = detail::normal_mat(H, H, rng);
    l.bk = detail::zeros(1, H);
    l.wv = detail::normal_mat(H, H, rng);
    l.bv = detail::zeros(1, H);
    l.wo = detail::normal_mat(H, H, rng);
    l.bo = detail::zeros(1, H);
    l.ln1_g = detail::ones(1, H);
    l.ln1_b = detail::zeros(1, H);
    l.w1 = detail::normal_mat(H, F, rng);
    l.b1 = detail::zeros(1, F);
    l.w2 = detail::normal_mat(F, H, rng);
    l.b2 = detail::zeros(1, H);
    l.ln2_g = detail::ones(1, H);
    l.ln2_b = detail::zeros(1, H);
    e.layers.push_back(std::move(l));
  }
  e.mlm_bias = detail::zeros(1, config.vocab);
  m.gloss.weight = detail::normal_mat(H, 2, rng);
  m.gloss.bias = detail::zeros(1, 2);
  return m;
}

/// Same shapes as `model`, all zeros. Used as a gradient accumulator.
inline Model zeros_like(const Model& model) {
  Model g = model;
  for_each_param(g, [](const std::string&, Mat& m, bool) { m.setZero(); });
  return g;
}

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr double kLayerNormEps = 1e-12;

struct LayerNormCache {
  Mat xhat;
  Eigen::VectorXd inv_std;
};

inline Mat layer_norm(const Mat& x, const Mat& gamma, const Mat& beta, LayerNormCache* cache) {
  const auto n = x.rows();
  const auto h = x.cols();
  Mat xhat(n, h);
  Eigen::VectorXd inv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().mean();
    inv(i) = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(i) = (x.row(i).array() - mu) * inv(i);
  }
  Mat y = (xhat.array().rowwise() * gamma.row(0).array()).rowwise() + beta.row(0).array();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv);
  }
  return y;
}

inline Mat layer_norm_backward(const Mat& dy, const LayerNormCache& c, const Mat& gamma, Mat& dgamma, Mat& dbeta) {
  dgamma.row(0) += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  dbeta.row(0) += dy.colwise().sum();
  const Mat dxhat = dy.array().rowwise() * gamma.row(0).array();
  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const double m1 = dxhat.row(i).mean();
    const double m2 = (dxhat.row(i).array() * c.xhat.row(i).array()).mean();
    dx.row(i) = c.inv_std(i) * (dxhat.row(i).array() - m1 - c.xhat.row(i).array() * m2);
  }
  return dx;
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }
inline double gelu_grad(double x) {
  return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) + x * std::exp(-0.5 * x * x) * (0.5 * M_2_SQRTPI * M_SQRT1_2);
}

/// Inverted-dropout scale mask, or an empty matrix when inactive.
inline Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng* rng) {
  if (!rng || p <= 0.0) return {};
  Mat m(rows, cols);
  const double keep = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng->uniform() < p ? 0.0 : keep;
  return m;
}

inline void apply_mask(Mat& x, const Mat& mask) {
  if (mask.size() != 0) x.array() *= mask.array();
}

inline Mat add_row(const Mat& x, const Mat& bias) { return x.rowwise() + bias.row(0); }

struct LayerCache {
  Mat x;
  Mat q, k, v;
  std::vector<Mat> probs;
  Mat ctx;
  Mat drop_attn;
  LayerNormCache ln1;
  Mat y1;
  Mat f1, g;
  Mat drop_ff;
  LayerNormCache ln2;
};

}  // namespace detail

/// Saved activations of one sequence's forward pass.
struct ForwardCache {
  std::vector<TokenId> ids;
  std::vector<std::uint8_t> segments;
  detail::LayerNormCache emb_ln;
  Mat drop_emb;
  std::vector<bool> key_mask;  // true = attendable (not PAD)
  std::vector<detail::LayerCache> layers;
};

struct EncoderOutput {
  Mat hidden;  // n x H
  RowVec aggregate() const { return hidden.row(0); }
};

/// Post-norm transformer encoder. `dropout_rng` enables training mode; pass
/// nullptr for a deterministic pass. PAD keys are excluded from attention.
inline EncoderOutput forward(const Model& model, const TokenSequence& seq, Rng* dropout_rng = nullptr,
                             ForwardCache* cache = nullptr) {
  const auto& cfg = model.config;
  const auto& e = model.encoder;
  const auto n = static_cast<Eigen::Index>(seq.ids.size());
  if (seq.ids.empty()) throw Error(ErrorKind::DimensionMismatch, "empty sequence");
  if (seq.ids.size() > cfg.max_positions)
    throw Error(ErrorKind::SequenceTooLong,
                std::to_string(seq.ids.size()) + " > " + std::to_string(cfg.max_positions));
  if (seq.segments.size() != seq.ids.size()) throw Error(ErrorKind::DimensionMismatch, "ids/segments length differ");
  const auto H = static_cast<Eigen::Index>(cfg.hidden);
  const auto heads = static_cast<Eigen::Index>(cfg.heads);
  const auto d = H / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  const double p = cfg.dropout;

  Mat emb(n, H);
  std::vector<bool> key_mask(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto id = seq.ids[static_cast<std::size_t>(i)];
    const auto s = seq.segments[static_cast<std::size_t>(i)];
    if (id < 0 || static_cast<std::size_t>(id) >= cfg.vocab)
      throw Error(ErrorKind::IdOutOfRange, "token id " + std::to_string(id));
    if (s >= cfg.segments) throw Error(ErrorKind::IdOutOfRange, "segment id " + std::to_string(s));
    emb.row(i) = e.tok_emb.row(id) + e.pos_emb.row(i) + e.seg_emb.row(s);
    key_mask[static_cast<std::size_t>(i)] = id != id_of(Special::Pad);
  }
  if (cache) {
    cache->ids = seq.ids;
    cache->segments = seq.segments;
    cache->key_mask = key_mask;
    cache->layers.clear();
  }
  Mat x = detail::layer_norm(emb, e.emb_ln_g, e.emb_ln_b, cache ? &cache->emb_ln : nullptr);
  Mat drop = detail::dropout_mask(n, H, p, dropout_rng);
  detail::apply_mask(x, drop);
  if (cache) cache->drop_emb = std::move(drop);

  for (const auto& l : e.layers) {
    detail::LayerCache lc;
    Mat q = detail::add_row(x * l.wq, l.bq);
    Mat k = detail::add_row(x * l.wk, l.bk);
    Mat v = detail::add_row(x * l.wv, l.bv);
    Mat ctx(n, H);
    for (Eigen::Index h = 0; h < heads; ++h) {
      Mat s = q.middleCols(h * d, d) * k.middleCols(h * d, d).transpose() * scale;
      Mat prob(n, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < n; ++j)
          if (key_mask[static_cast<std::size_t>(j)]) mx = std::max(mx, s(i, j));
        double z = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
          const double w = key_mask[static_cast<std::size_t>(j)] ? std::exp(s(i, j) - mx) : 0.0;
          prob(i, j) = w;
          z += w;
        }
        prob.row(i) /= z;
      }
      ctx.middleCols(h * d, d) = prob * v.middleCols(h * d, d);
      if (cache) lc.probs.push_back(std::move(prob));
    }
    Mat attn = detail::add_row(ctx * l.wo, l.bo);
    Mat d1 = detail::dropout_mask(n, H, p, dropout_rng);
    detail::apply_mask(attn, d1);
    Mat y1 = detail::layer_norm(x + attn, l.ln1_g, l.ln1_b, cache ? &lc.ln1 : nullptr);
    Mat f1 = detail::add_row(y1 * l.w1, l.b1);
    Mat g = f1.unaryExpr([](double t) { return detail::gelu(t); });
    Mat f2 = detail::add_row(g * l.w2, l.b2);
    Mat d2 = detail::dropout_mask(n, H, p, dropout_rng);
    detail::apply_mask(f2, d2);
    Mat y2 = detail::layer_norm(y1 + f2, l.ln2_g, l.ln2_b, cache ? &lc.ln2 : nullptr);
    if (cache) {
      lc.x = std::move(x);
      lc.q = std::move(q);
      lc.k = std::move(k);
      lc.v = std::move(v);
      lc.ctx = std::move(ctx);
      lc.drop_attn = std::move(d1);
      lc.y1 = std::move(y1);
      lc.f1 = std::move(f1);
      lc.g = std::move(g);
      lc.drop_ff = std::move(d2);
      cache->layers.push_back(std::move(lc));
    }
    x = std::move(y2);
  }
  return EncoderOutput{std::move(x)};
}

/// Accumulates parameter gradients into `grads` given dLoss/dHidden.
inline void backward(const Model& model, const ForwardCache& cache, const Mat& d_hidden, Model& grads) {
  const auto& cfg = model.config;
  const auto H = static_cast<Eigen::Index>(cfg.hidden);
  const auto heads = static_cast<Eigen::Index>(cfg.heads);
  const auto d = H / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  const auto n = d_hidden.rows();

  Mat dx = d_hidden;
  for (std::size_t li = model.encoder.layers.size(); li-- > 0;) {
    const auto& l = model.encoder.layers[li];
    auto& gl = grads.encoder.layers[li];
    const auto& c = cache.layers[li];

    Mat dr2 = detail::layer_norm_backward(dx, c.ln2, l.ln2_g, gl.ln2_g, gl.ln2_b);
    Mat dy1 = dr2;
    Mat df2 = dr2;
    detail::apply_mask(df2, c.drop_ff);
    gl.w2.noalias() += c.g.transpose() * df2;
    gl.b2.row(0) += df2.colwise().sum();
    Mat dg = df2 * l.w2.transpose();
    Mat df1 = dg.array() * c.f1.unaryExpr([](double t) { return detail::gelu_grad(t); }).array();
    gl.w1.noalias() += c.y1.transpose() * df1;
    gl.b1.row(0) += df1.colwise().sum();
    dy1.noalias() += df1 * l.w1.transpose();

    Mat dr1 = detail::layer_norm_backward(dy1, c.ln1, l.ln1_g, gl.ln1_g, gl.ln1_b);
    Mat dattn = dr1;
    detail::apply_mask(dattn, c.drop_attn);
    gl.wo.noalias() += c.ctx.transpose() * dattn;
    gl.bo.row(0) += dattn.colwise().sum();
    Mat dctx = dattn * l.wo.transpose();

    Mat dq(n, H), dk(n, H), dv(n, H);
    for (Eigen::Index h = 0; h < heads; ++h) {
      const Mat& prob = c.probs[static_cast<std::size_t>(h)];
      const Mat dch = dctx.middleCols(h * d, d);
      Mat dprob = dch * c.v.middleCols(h * d, d).transpose();
      dv.middleCols(h * d, d) = prob.transpose() * dch;
      Eigen::VectorXd rs = (dprob.array() * prob.array()).rowwise().sum();
      Mat ds = (prob.array() * (dprob.colwise() - rs).array()) * scale;
      dq.middleCols(h * d, d) = ds * c.k.middleCols(h * d, d);
      dk.middleCols(h * d, d) = ds.transpose() * c.q.middleCols(h * d, d);
    }
    gl.wq.noalias() += c.x.transpose() * dq;
    gl.bq.row(0) += dq.colwise().sum();
    gl.wk.noalias() += c.x.transpose() * dk;
    gl.bk.row(0) += dk.colwise().sum();
    gl.wv.noalias() += c.x.transpose() * dv;
    gl.bv.row(0) += dv.colwise().sum();
    dx = dr1;
    dx.noalias() += dq * l.wq.transpose();
    dx.noalias() += dk * l.wk.transpose();
    dx.noalias() += dv * l.wv.transpose();
  }

  detail::apply_mask(dx, cache.drop_emb);
  Mat demb = detail::layer_norm_backward(dx, cache.emb_ln, model.encoder.emb_ln_g, grads.encoder.emb_ln_g,
                                         grads.encoder.emb_ln_b);
  for (Eigen::Index i = 0; i < n; ++i) {
    grads.encoder.tok_emb.row(cache.ids[static_cast<std::size_t>(i)]) += demb.row(i);
    grads.encoder.pos_emb.row(i) += demb.row(i);
    grads.encoder.seg_emb.row(cache.segments[static_cast<std::size_t>(i)]) += demb.row(i);
  }
}

// ---------------------------------------------------------------------------
// Heads
// ---------------------------------------------------------------------------

/// (negative, positive) logits for one aggregate vector.
inline RowVec gloss_logits(const GlossHead& head, const RowVec& aggregate) {
  return aggregate * head.weight + head.bias.row(0);
}

inline std::vector<double> softmax(std::span<const double> scores) {
  std::vector<double> out(scores.size());
  if (scores.empty()) return out;
  double mx = scores[0];
  for (double s : scores) mx = std::max(mx, s);
  double z = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) z += (out[i] = std::exp(scores[i] - mx));
  for (double& o : out) o /= z;
  return out;
}

/// Positive-class logit of every sequence (stacked candidates).
inline std::vector<double> positive_scores(const Model& model, std::span<const TokenSequence> sequences,
                                           Rng* dropout_rng = nullptr) {
  std::vector<double> scores;
  scores.reserve(sequences.size());
  for (const auto& s : sequences) scores.push_back(gloss_logits(model.gloss, forward(model, s, dropout_rng).aggregate())(1));
  return scores;
}

/// Softmax over the k stacked positive logits.
inline std::vector<double> score_candidates(const Model& model, std::span<const TokenSequence> sequences,
                                            Rng* dropout_rng = nullptr) {
  const auto scores = positive_scores(model, sequences, dropout_rng);
  return softmax(scores);
}

/// logits = hidden[pos] . token_embedding^T + bias, one row per position.
inline Mat mlm_logits(const Model& model, const Mat& hidden, std::span<const std::size_t> positions) {
  Mat rows(static_cast<Eigen::Index>(positions.size()), hidden.cols());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (positions[i] >= static_cast<std::size_t>(hidden.rows()))
      throw Error(ErrorKind::PositionOutOfRange,
                  std::to_string(positions[i]) + " >= " + std::to_string(hidden.rows()));
    rows.row(static_cast<Eigen::Index>(i)) = hidden.row(static_cast<Eigen::Index>(positions[i]));
  }
  Mat logits = rows * model.encoder.tok_emb.transpose();
  logits.rowwise() += model.encoder.mlm_bias.row(0);
  return logits;
}

/// W . aggregate + b (K logits, or one regression value).
inline RowVec head_output(const DownstreamHead& head, const RowVec& aggregate) {
  if (aggregate.size() != head.weight.cols())
    throw Error(ErrorKind::DimensionMismatch, "aggregate width " + std::to_string(aggregate.size()) + " vs head " +
                                                  std::to_string(head.weight.cols()));
  return aggregate * head.weight.transpose() + head.bias.row(0);
}

inline RowVec downstream_forward(const Model& model, const DownstreamHead& head, const TokenSequence& seq) {
  return head_output(head, forward(model, seq).aggregate());
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline constexpr char kCheckpointMagic[8] = {'L', 'M', 'G', 'C', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <class T>
void put(std::string& out, T v) {
  v = to_little(v);
  out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T take(std::string_view& in, const std::string& path) {
  if (in.size() < sizeof(T)) throw Error(ErrorKind::ShapeMismatch, path + ": truncated checkpoint");
  T v;
  std::memcpy(&v, in.data(), sizeof(T));
  in.remove_prefix(sizeof(T));
  return to_little(v);
}

}  // namespace detail

/// Magic, format version, JSON header (config, tensor shapes, head kind),
/// then little-endian float64 tensors in declaration order.
inline std::string serialize_checkpoint(const Model& model) {
  nlohmann::json tensors = nlohmann::json::array();
  for_each_param(model, [&](const std::string& name, const Mat& m, bool) {
    tensors.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  });
  nlohmann::json header = {{"format_version", kCheckpointVersion}, {"config", model.config}, {"tensors", tensors}};
  if (model.downstream)
    header["downstream"] = {{"kind", model.downstream->kind == HeadKind::Regression ? "regression" : "classification"},
                            {"outputs", model.downstream->outputs()}};
  const std::string h = header.dump();
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put<std::uint32_t>(out, kCheckpointVersion);
  detail::put<std::uint64_t>(out, h.size());
  out += h;
  for_each_param(model, [&](const std::string&, const Mat& m, bool) {
    for (Eigen::Index i = 0; i < m.size(); ++i) detail::put<double>(out, m.data()[i]);
  });
  return out;
}

inline Model deserialize_checkpoint(std::string_view in, const std::string& origin = "<checkpoint>") {
  if (in.size() < sizeof(kCheckpointMagic) || std::memcmp(in.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
    throw Error(ErrorKind::VersionMismatch, origin + ": bad magic bytes");
  in.remove_prefix(sizeof(kCheckpointMagic));
  const auto version = detail::take<std::uint32_t>(in, origin);
  if (version != kCheckpointVersion)
    throw Error(ErrorKind::VersionMismatch, origin + ": format version " + std::to_string(version));
  const auto hlen = detail::take<std::uint64_t>(in, origin);
  if (in.size() < hlen) throw Error(ErrorKind::ShapeMismatch, origin + ": truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(in.substr(0, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::VersionMismatch, origin + ": unreadable header: " + e.what());
  }
  in.remove_prefix(hlen);

  ModelConfig cfg = header.at("config").get<ModelConfig>();
  cfg.validate();
  Model model = init_params(cfg);
  if (header.contains("downstream")) {
    Rng unused(0);
    const auto kind = header["downstream"].at("kind").get<std::string>() == "regression" ? HeadKind::Regression
                                                                                         : HeadKind::Classification;
    model.downstream = make_downstream_head(kind, cfg.hidden, header["downstream"].at("outputs").get<std::size_t>(),
                                            unused);
  }
  const auto& tensors = header.at("tensors");
  std::size_t t = 0;
  for_each_param(model, [&](const std::string& name, Mat& m, bool) {
    if (t >= tensors.size() || tensors[t].at("name") != name || tensors[t].at("rows") != m.rows() ||
        tensors[t].at("cols") != m.cols())
      throw Error(ErrorKind::ShapeMismatch, origin + ": tensor '" + name + "' disagrees with header");
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = detail::take<double>(in, origin);
    ++t;
  });
  if (t != tensors.size() || !in.empty()) throw Error(ErrorKind::ShapeMismatch, origin + ": trailing tensors");
  return model;
}

inline void save_checkpoint(const Model& model, const std::string& path) { write_file(path, serialize_checkpoint(model)); }

inline Model load_checkpoint(const std::string& path) { return deserialize_checkpoint(read_file(path), path); }

/// Loads and requires the stored layout to match `expected`.
inline Model load_checkpoint(const std::string& path, const ModelConfig& expected) {
  Model m = load_checkpoint(path);
  if (!m.config.same_shape(expected)) throw Error(ErrorKind::ShapeMismatch, path + ": config differs from expected");
  return m;
}

inline bool params_equal(const Model& a, const Model& b) {
  if (!a.config.same_shape(b.config) || a.downstream.has_value() != b.downstream.has_value()) return false;
  std::vector<const Mat*> bs;
  for_each_param(b, [&](const std::string&, const Mat& m, bool) { bs.push_back(&m); });
  std::size_t i = 0;
  bool equal = true;
  for_each_param(a, [&](const std::string&, const Mat& m, bool) {
    const Mat& o = *bs[i++];
    equal = equal && m.rows() == o.rows() && m.cols() == o.cols() &&
            std::memcmp(m.data(), o.data(), sizeof(double) * static_cast<std::size_t>(m.size())) == 0;
  });
  return equal;
}

}  // namespace lmgc
