#include "rul/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "rul/nn/ops.hpp"

namespace rul {

double huber(double pred, double target, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("huber: beta must be positive");
  const double d = std::abs(pred - target);
  return d < beta ? 0.5 * d * d : beta * (d - 0.5 * beta);
}

double mcosine(std::span<const std::vector<double>> latents, double epsilon) {
  if (latents.size() < 2) return 0.0;
  const std::size_t dim = latents[0].size();
  for (const auto& z : latents) {
    if (z.size() != dim) throw std::invalid_argument("mcosine: latent dimension mismatch");
  }
  auto norm = [](const std::vector<double>& z) {
    double s = 0.0;
    for (double v : z) s += v * v;
    return std::sqrt(s);
  };
  double total = 0.0;
  for (std::size_t i = 0; i < latents.size(); ++i) {
    for (std::size_t j = 0; j < latents.size(); ++j) {
      if (i == j) continue;
      double dot = 0.0;
      for (std::size_t k = 0; k < dim; ++k) dot += latents[i][k] * latents[j][k];
      const double cos = dot / std::max(norm(latents[i]) * norm(latents[j]), epsilon);
      total += std::max(cos, 0.0);
    }
  }
  return total;
}

double composite_loss(double model_pred, std::span<const double> block_preds,
                      std::span<const std::vector<double>> latents, double target, const LossWeights& w) {
  if (block_preds.empty() || block_preds.size() != latents.size()) {
    throw std::invalid_argument("composite_loss: need matching, non-empty block predictions and latents");
  }
  double blocks = 0.0;
  for (double p : block_preds) blocks += huber(p, target, w.beta);
  return huber(model_pred, target, w.beta) + w.lambda * blocks + w.sigma * mcosine(latents, w.epsilon);
}

nn::Var huber_loss(const nn::Var& pred, const nn::Var& target, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("huber: beta must be positive");
  nn::Var diff = nn::sub(pred, target);
  nn::Tensor y(diff.shape());
  const nn::Tensor& d = diff.value();
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double a = std::abs(d[i]);
    y[i] = a < beta ? 0.5 * a * a : beta * (a - 0.5 * beta);
  }
  nn::Node* pd = diff.node();
  nn::Var elementwise = diff.tape().record(std::move(y), diff.requires_grad(), [pd, beta](nn::Node& self) {
    nn::Tensor& g = pd->grad_buffer();
    const nn::Tensor& d = pd->value();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double slope = std::abs(d[i]) < beta ? d[i] : (d[i] > 0.0 ? beta : -beta);
      g[i] += self.grad[i] * slope;
    }
  });
  return nn::mean(elementwise);
}

nn::Var mcosine_loss(const std::vector<nn::Var>& latents, double epsilon) {
  if (latents.size() < 2) throw std::invalid_argument("mcosine_loss: need at least two latents");
  std::vector<nn::Var> norms;
  for (const auto& z : latents) {
    if (z.shape() != latents[0].shape()) throw std::invalid_argument("mcosine: latent dimension mismatch");
    norms.push_back(nn::row_norm(z));
  }
  nn::Var total;
  for (std::size_t i = 0; i < latents.size(); ++i) {
    for (std::size_t j = 0; j < latents.size(); ++j) {
      if (i == j) continue;
      nn::Var denom = nn::clamp_min(nn::mul(norms[i], norms[j]), epsilon);
      nn::Var term = nn::relu(nn::div(nn::row_dot(latents[i], latents[j]), denom));
      total = total ? nn::add(total, term) : term;
    }
  }
  return nn::mean(total);
}

nn::Var composite_loss(const nn::Var& model_pred, const std::vector<nn::Var>& block_preds,
                       const std::vector<nn::Var>& latents, const nn::Var& target, const LossWeights& w) {
  if (block_preds.empty() || block_preds.size() != latents.size()) {
    throw std::invalid_argument("composite_loss: need matching, non-empty block predictions and latents");
  }
  nn::Var loss = huber_loss(model_pred, target, w.beta);
  nn::Var blocks;
  for (const auto& p : block_preds) {
    nn::Var h = huber_loss(p, target, w.beta);
    blocks = blocks ? nn::add(blocks, h) : h;
  }
  loss = nn::add(loss, nn::scale(blocks, w.lambda));
  if (latents.size() >= 2) loss = nn::add(loss, nn::scale(mcosine_loss(latents, w.epsilon), w.sigma));
  return loss;
}

}  // namespace rul
