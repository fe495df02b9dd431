#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "rul/nn/checkpoint.hpp"
#include "rul/nn/optim.hpp"

using namespace rul::nn;

TEST(AdamW, ZeroGradientOnlyDecays) {
  ParameterSet ps;
  Parameter& p = ps.create("w", Tensor({2}, {2.0, -4.0}));
  AdamW opt(ps.all(), AdamWOptions{.weight_decay = 0.0});
  opt.step(0.1);
  EXPECT_EQ(p.value, Tensor({2}, {2.0, -4.0}));
  AdamW decayed(ps.all(), AdamWOptions{.weight_decay = 0.5});
  decayed.step(0.1);
  EXPECT_DOUBLE_EQ(p.value[0], 2.0 * (1 - 0.1 * 0.5));
  EXPECT_DOUBLE_EQ(p.value[1], -4.0 * (1 - 0.1 * 0.5));
  EXPECT_THROW(opt.step(0.0), std::invalid_argument);
}

TEST(AdamW, TwoStepsOnQuadraticMatchHandComputation) {
  // f(w) = (w - 3)^2, w0 = 1, lr = 0.1, wd = 0.01.
  ParameterSet ps;
  Parameter& p = ps.create("w", Tensor({1}, {1.0}));
  AdamW opt(ps.all(), AdamWOptions{.weight_decay = 0.01});
  double w = 1.0, m = 0, v = 0;
  for (int t = 1; t <= 2; ++t) {
    p.grad[0] = 2 * (p.value[0] - 3);
    opt.step(0.1);
    const double g = 2 * (w - 3);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
    w = w * (1 - 0.1 * 0.01) - 0.1 * mh / (std::sqrt(vh) + 1e-8);
  }
  // Step 1: m_hat / sqrt(v_hat) = -1, so w1 = 0.999 + 0.1 (less eps).
  EXPECT_NEAR(p.value[0], w, 1e-15);
  EXPECT_NEAR(p.value[0], 1.197736553268775, 1e-12);  // independent python evaluation
  EXPECT_EQ(opt.step_count(), 2);
}

TEST(CyclicLr, TriangleEndpoints) {
  const TriangularCyclicLr lr(1e-4, 5e-4, 10);
  EXPECT_DOUBLE_EQ(lr(0), 1e-4);
  EXPECT_DOUBLE_EQ(lr(10), 5e-4);
  EXPECT_DOUBLE_EQ(lr(20), 1e-4);
  EXPECT_DOUBLE_EQ(lr(5), 3e-4);
  EXPECT_DOUBLE_EQ(lr(30), 5e-4);
  const TriangularCyclicLr decayed(1e-4, 5e-4, 10, true);
  EXPECT_DOUBLE_EQ(decayed(10), 5e-4);
  EXPECT_DOUBLE_EQ(decayed(30), 3e-4);
  EXPECT_THROW(TriangularCyclicLr(5e-4, 1e-4, 10), std::invalid_argument);
  EXPECT_THROW(TriangularCyclicLr(1e-4, 5e-4, 0), std::invalid_argument);
}

TEST(ClipGradNorm, RescalesOnlyAboveThreshold) {
  ParameterSet ps;
  Parameter& a = ps.create("a", Tensor({1}));
  Parameter& b = ps.create("b", Tensor({1}));
  a.grad[0] = 3;
  b.grad[0] = 4;
  EXPECT_DOUBLE_EQ(clip_grad_norm(ps.all(), 10.0), 5.0);
  EXPECT_DOUBLE_EQ(a.grad[0], 3.0);
  EXPECT_DOUBLE_EQ(clip_grad_norm(ps.all(), 1.0), 5.0);
  EXPECT_NEAR(a.grad[0], 0.6, 1e-15);
  EXPECT_NEAR(b.grad[0], 0.8, 1e-15);
}

TEST(Checkpoint, RoundTripAndShapeChecks) {
  ParameterSet ps;
  ps.create("layer.w", Tensor({2, 3}, {1, 2, 3, 4, 5, 6.25}));
  ps.create("layer.b", Tensor({3}, {-1e-300, 0.1, 1e300}));
  const auto path = std::filesystem::temp_directory_path() / ("rul_ckpt_" + std::to_string(::getpid()) + ".ckpt");
  save_checkpoint(path, snapshot(ps, "abc"));
  const auto loaded = load_checkpoint(path);
  EXPECT_EQ(loaded.config_hash, "abc");
  EXPECT_EQ(loaded.arrays.at("layer.w"), ps.find("layer.w")->value);
  EXPECT_EQ(loaded.arrays.at("layer.b"), ps.find("layer.b")->value);

  ParameterSet other;
  other.create("layer.w", Tensor({2, 3}));
  other.create("layer.b", Tensor({3}));
  restore(other, loaded);
  EXPECT_EQ(other.find("layer.b")->value, ps.find("layer.b")->value);
  ParameterSet wrong;
  wrong.create("layer.w", Tensor({3, 2}));
  EXPECT_THROW(restore(wrong, loaded), std::runtime_error);
  ParameterSet missing;
  missing.create("other", Tensor({1}));
  EXPECT_THROW(restore(missing, loaded), std::runtime_error);

  {
    std::ofstream corrupt(path, std::ios::binary | std::ios::trunc);
    corrupt << "NOTACKPT";
  }
  EXPECT_ANY_THROW(load_checkpoint(path));
  std::filesystem::remove(path);
}
