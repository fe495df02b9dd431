#pragma once

#include <cstdint>
#include <vector>

#include "rul/nn/autograd.hpp"

namespace rul::nn {

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
};

/// Adam with decoupled weight decay: the decay shrinks weights directly and
/// never enters the moment estimates.
class AdamW {
 public:
  AdamW(std::vector<Parameter*> params, AdamWOptions options = {});

  /// One update from the gradients currently stored on the parameters.
  void step(double lr);
  void zero_grad();

  std::int64_t step_count() const { return steps_; }
  const AdamWOptions& options() const { return options_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

 private:
  std::vector<Parameter*> params_;
  AdamWOptions options_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::int64_t steps_ = 0;
};

/// Triangle wave between lr_min and lr_max, starting at lr_min; one full
/// triangle spans 2 * half_period steps. With amplitude_decay the peak of
/// each later cycle is halved.
class TriangularCyclicLr {
 public:
  TriangularCyclicLr(double lr_min, double lr_max, std::int64_t half_period, bool amplitude_decay = false);

  double operator()(std::int64_t step) const;

  double lr_min() const { return lr_min_; }
  double lr_max() const { return lr_max_; }
  std::int64_t half_period() const { return half_period_; }

 private:
  double lr_min_;
  double lr_max_;
  std::int64_t half_period_;
  bool decay_;
};

/// Rescales all gradients so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_grad_norm(const std::vector<Parameter*>& params, double max_norm);

}  // namespace rul::nn
