#include "rul/nn/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace rul::nn {

AdamW::AdamW(std::vector<Parameter*> params, AdamWOptions options)
    : params_(std::move(params)), options_(options) {
  for (const Parameter* p : params_) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

void AdamW::step(double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("AdamW: learning rate must be positive");
  ++steps_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const double decay = 1.0 - lr * options_.weight_decay;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& w = params_[k]->value;
    const Tensor& g = params_[k]->grad;
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      w[i] = w[i] * decay - lr * m_hat / (std::sqrt(v_hat) + options_.eps);
    }
  }
}

void AdamW::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

TriangularCyclicLr::TriangularCyclicLr(double lr_min, double lr_max, std::int64_t half_period,
                                       bool amplitude_decay)
    : lr_min_(lr_min), lr_max_(lr_max), half_period_(half_period), decay_(amplitude_decay) {
  if (lr_min > lr_max) throw std::invalid_argument("cyclic lr: lr_min > lr_max");
  if (half_period < 1) throw std::invalid_argument("cyclic lr: half_period must be >= 1");
}

double TriangularCyclicLr::operator()(std::int64_t step) const {
  const double hp = static_cast<double>(half_period_);
  const double cycle = std::floor(1.0 + static_cast<double>(step) / (2.0 * hp));
  const double x = std::abs(static_cast<double>(step) / hp - 2.0 * cycle + 1.0);
  double amplitude = (lr_max_ - lr_min_) * std::max(0.0, 1.0 - x);
  if (decay_) amplitude /= std::pow(2.0, cycle - 1.0);
  return lr_min_ + amplitude;
}

double clip_grad_norm(const std::vector<Parameter*>& params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params)
    for (double g : p->grad.data()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (Parameter* p : params)
      for (double& g : p->grad.data()) g *= s;
  }
  return norm;
}

}  // namespace rul::nn
