#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "model.hpp"

namespace lmgc {

struct AdamWConfig {
  double lr = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// One decoupled-weight-decay Adam update of a flat block at step `t`
/// (1-based). theta -= lr * mhat / (sqrt(vhat) + eps) + lr * wd * theta.
inline void adamw_update(std::span<double> theta, std::span<const double> grad, std::span<double> m,
                         std::span<double> v, std::size_t t, const AdamWConfig& cfg, bool decay) {
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  const double wd = decay ? cfg.weight_decay : 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    theta[i] -= cfg.lr * (mhat / (std::sqrt(vhat) + cfg.eps)) + cfg.lr * wd * theta[i];
  }
}

/// Moment buffers for every tensor of a Model, in for_each_param order.
/// Biases and layer-norm parameters are not decayed.
class AdamW {
public:
  AdamW(const Model& model, AdamWConfig cfg) : cfg_(cfg) {
    for_each_param(model, [&](const std::string&, const Mat& p, bool) {
      m_.push_back(Mat::Zero(p.rows(), p.cols()));
      v_.push_back(Mat::Zero(p.rows(), p.cols()));
    });
  }

  void step(Model& model, const Model& grads) {
    for_each_param(grads, [&](const std::string& name, const Mat& g, bool) {
      if (!g.allFinite()) throw Error(ErrorKind::NonFiniteGradient, name);
    });
    ++t_;
    std::vector<const Mat*> gs;
    for_each_param(grads, [&](const std::string&, const Mat& g, bool) { gs.push_back(&g); });
    std::size_t i = 0;
    for_each_param(model, [&](const std::string&, Mat& p, bool decay) {
      const auto n = static_cast<std::size_t>(p.size());
      adamw_update({p.data(), n}, {gs[i]->data(), n}, {m_[i].data(), n}, {v_[i].data(), n}, t_, cfg_, decay);
      ++i;
    });
  }

  std::size_t steps() const noexcept { return t_; }
  const AdamWConfig& config() const noexcept { return cfg_; }

private:
  AdamWConfig cfg_;
  std::vector<Mat> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace lmgc
