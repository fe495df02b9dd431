#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "rul/losses.hpp"
#include "rul/metrics.hpp"
#include "rul/nn/ops.hpp"

using namespace rul;

TEST(Rmse, Examples) {
  std::vector<EvalPair> same{{5, 5}, {7, 7}};
  EXPECT_EQ(rmse(same), 0.0);
  std::vector<EvalPair> three{{13, 10}, {3, 0}, {-1, -4}};
  EXPECT_DOUBLE_EQ(rmse(three), 3.0);
  std::vector<EvalPair> mixed{{3, 0}, {-4, 0}};
  EXPECT_NEAR(rmse(mixed), 3.53553390593, 1e-10);
  EXPECT_THROW(rmse(std::vector<EvalPair>{}), std::invalid_argument);
}

TEST(PhmScore, ExamplesAndAsymmetry) {
  EXPECT_EQ(phm_score_term(0.0), 0.0);
  EXPECT_NEAR(phm_score_term(10.0), std::exp(1.0) - 1.0, 1e-14);
  EXPECT_NEAR(phm_score_term(-13.0), std::exp(1.0) - 1.0, 1e-14);
  for (double d : {0.5, 3.0, 20.0}) EXPECT_GT(phm_score_term(d), phm_score_term(-d));
  std::vector<EvalPair> p{{110, 100}, {87, 100}};
  EXPECT_NEAR(phm_score(p), 2 * (std::exp(1.0) - 1.0), 1e-12);
  EXPECT_THROW(phm_score(std::vector<EvalPair>{}), std::invalid_argument);
}

TEST(Huber, Branches) {
  EXPECT_EQ(huber(3.0, 3.0), 0.0);
  EXPECT_DOUBLE_EQ(huber(0.5, 0.0), 0.125);
  EXPECT_DOUBLE_EQ(huber(0.0, 2.0), 1.5);
  EXPECT_THROW(huber(0, 0, 0.0), std::invalid_argument);
}

TEST(Mcosine, TrivialCases) {
  const std::vector<std::vector<double>> same{{1, 2, 3}, {1, 2, 3}};
  EXPECT_NEAR(mcosine(same), 2.0, 1e-12);
  const std::vector<std::vector<double>> ortho{{1, 0}, {0, 3}};
  EXPECT_EQ(mcosine(ortho), 0.0);
  const std::vector<std::vector<double>> anti{{1, 2}, {-2, -4}};
  EXPECT_EQ(mcosine(anti), 0.0);
  const std::vector<std::vector<double>> one{{1, 2}};
  EXPECT_EQ(mcosine(one), 0.0);
  // Zero vectors hit the epsilon floor instead of dividing by zero.
  const std::vector<std::vector<double>> zeros{{0, 0}, {1, 1}};
  EXPECT_EQ(mcosine(zeros), 0.0);
}

TEST(Composite, DegenerateAndIdenticalCases) {
  const std::vector<double> one_block{4.0};
  const std::vector<std::vector<double>> one_latent{{1, 2}};
  EXPECT_NEAR(composite_loss(2.0, one_block, one_latent, 2.5), huber(2.0, 2.5) + 0.3 * huber(4.0, 2.5), 1e-14);
  const std::vector<double> exact{7.0, 7.0};
  const std::vector<std::vector<double>> same{{1, 1}, {1, 1}};
  EXPECT_NEAR(composite_loss(7.0, exact, same, 7.0), 2.0, 1e-12);
}

TEST(Composite, BatchedFormAveragesScalarForm) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> d(0, 3);
  const std::size_t B = 4, P = 3, D = 5;
  nn::Tape tape;
  nn::Tensor pred({B, 1}), target({B, 1});
  std::vector<nn::Tensor> blocks(P, nn::Tensor({B, 1})), latents(P, nn::Tensor({B, D}));
  for (auto& v : pred.data()) v = d(rng);
  for (auto& v : target.data()) v = d(rng);
  for (auto& t : blocks)
    for (auto& v : t.data()) v = d(rng);
  for (auto& t : latents)
    for (auto& v : t.data()) v = d(rng);
  std::vector<nn::Var> bv, lv;
  for (auto& t : blocks) bv.push_back(tape.constant(t));
  for (auto& t : latents) lv.push_back(tape.constant(t));
  const double batched =
      composite_loss(tape.constant(pred), bv, lv, tape.constant(target)).value()[0];
  double expect = 0;
  for (std::size_t b = 0; b < B; ++b) {
    std::vector<double> bp;
    std::vector<std::vector<double>> lz;
    for (std::size_t k = 0; k < P; ++k) {
      bp.push_back(blocks[k][b]);
      lz.emplace_back(latents[k].ptr() + b * D, latents[k].ptr() + (b + 1) * D);
    }
    expect += composite_loss(pred[b], bp, lz, target[b]) / B;
  }
  EXPECT_NEAR(batched, expect, 1e-12);
}
