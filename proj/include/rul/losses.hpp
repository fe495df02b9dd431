#pragma once

#include <span>
#include <vector>

#include "rul/nn/autograd.hpp"

namespace rul {

struct LossWeights {
  double lambda = 0.3;    // per-block head weight
  double sigma = 1.0;     // cosine divergence weight
  double beta = 1.0;      // Huber threshold, cycles
  double epsilon = 1e-7;  // cosine denominator floor

  bool operator==(const LossWeights&) const = default;
};

double huber(double pred, double target, double beta = 1.0);

/// Sum over ordered pairs (i, j), i != j, of max(cos(z_i, z_j), 0) where the
/// cosine denominator is floored at epsilon. Zero for fewer than two vectors.
double mcosine(std::span<const std::vector<double>> latents, double epsilon = 1e-7);

/// Huber(model) + lambda * sum_k Huber(block_k) + sigma * mcosine(latents).
double composite_loss(double model_pred, std::span<const double> block_preds,
                      std::span<const std::vector<double>> latents, double target, const LossWeights& w = {});

// Batched, differentiable forms. Predictions and targets are [B, 1];
// latents are [B, D]. Every term is averaged over the batch.

nn::Var huber_loss(const nn::Var& pred, const nn::Var& target, double beta = 1.0);
nn::Var mcosine_loss(const std::vector<nn::Var>& latents, double epsilon = 1e-7);
nn::Var composite_loss(const nn::Var& model_pred, const std::vector<nn::Var>& block_preds,
                       const std::vector<nn::Var>& latents, const nn::Var& target, const LossWeights& w = {});

}  // namespace rul
