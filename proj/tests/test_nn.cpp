#include <gtest/gtest.h>

#include <cmath>

#include "rul/nn/layers.hpp"
#include "support/grad_cases.hpp"

using namespace rul;
using namespace rul::nn;
using rul::testing::random_tensor;

TEST(Tensor, ShapeAndIndexing) {
  Tensor t({2, 3, 4});
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.rank(), 3u);
  t.at(1, 2, 3) = 5.0;
  EXPECT_EQ(t[23], 5.0);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), std::invalid_argument);
  EXPECT_THROW(t.reshaped({5, 5}), std::invalid_argument);
  EXPECT_EQ(t.reshaped({24}).shape(), Shape{24});
}

TEST(Autograd, ChainRuleThroughSharedInput) {
  Tape tape;
  Var x = tape.leaf(Tensor({1}, {3.0}));
  // y = x * x + x -> dy/dx = 2x + 1
  Var y = add(mul(x, x), x);
  tape.backward(y);
  EXPECT_DOUBLE_EQ(x.grad()[0], 7.0);
}

TEST(Autograd, BackwardNeedsScalarRoot) {
  Tape tape;
  Var x = tape.leaf(Tensor({2}, {1.0, 2.0}));
  EXPECT_THROW(tape.backward(x), std::invalid_argument);
}

TEST(Autograd, ParameterGradientsAccumulate) {
  ParameterSet ps;
  Parameter& p = ps.create("w", Tensor({2}, {1.0, -2.0}));
  EXPECT_THROW(ps.create("w", Tensor({1})), std::invalid_argument);
  for (int i = 0; i < 2; ++i) {
    Tape tape;
    tape.backward(sum(scale(tape.param(p), 3.0)));
  }
  EXPECT_DOUBLE_EQ(p.grad[0], 6.0);
  ps.zero_grad();
  EXPECT_DOUBLE_EQ(p.grad[1], 0.0);
}

TEST(Autograd, GradDisabledRecordsNoGradients) {
  ParameterSet ps;
  Parameter& p = ps.create("w", Tensor({1}, {2.0}));
  Tape tape;
  tape.set_grad_enabled(false);
  Var y = mul(tape.param(p), tape.param(p));
  EXPECT_FALSE(y.requires_grad());
  EXPECT_DOUBLE_EQ(y.value()[0], 4.0);
}

class PrimitiveGradient : public ::testing::TestWithParam<std::size_t> {};

TEST_P(PrimitiveGradient, MatchesCentralDifferences) {
  static const auto cases = rul::testing::primitive_grad_cases();
  const auto& c = cases.at(GetParam());
  EXPECT_LT(rul::testing::max_grad_error(c.fn, c.inputs), 1e-4) << c.name;
}

INSTANTIATE_TEST_SUITE_P(All, PrimitiveGradient,
                         ::testing::Range<std::size_t>(0, rul::testing::primitive_grad_cases().size()),
                         [](const ::testing::TestParamInfo<std::size_t>& info) {
                           static const auto cases = rul::testing::primitive_grad_cases();
                           return cases[info.param].name;
                         });

TEST(Ops, SoftmaxRowsSumToOne) {
  Tape tape;
  Var y = softmax(tape.constant(random_tensor({2, 3, 5}, 1, -20, 20)));
  for (std::size_t r = 0; r < 6; ++r) {
    double s = 0;
    for (std::size_t k = 0; k < 5; ++k) s += y.value()[r * 5 + k];
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Ops, Conv1dMatchesDirectSum) {
  const Tensor x = random_tensor({2, 3, 8}, 2), w = random_tensor({4, 3, 3}, 3), b = random_tensor({4}, 4);
  Tape tape;
  const Tensor y = conv1d(tape.constant(x), tape.constant(w), tape.constant(b), 2).value();
  ASSERT_EQ(y.shape(), (Shape{2, 4, 3}));
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t o = 0; o < 4; ++o)
      for (std::size_t t = 0; t < 3; ++t) {
        double s = b[o];
        for (std::size_t c = 0; c < 3; ++c)
          for (std::size_t k = 0; k < 3; ++k) s += w.at(o, c, k) * x.at(n, c, 2 * t + k);
        EXPECT_NEAR(y.at(n, o, t), s, 1e-12);
      }
}

TEST(Ops, MaxPoolPicksWindowMaximum) {
  Tape tape;
  const Tensor x({1, 1, 6}, {1, 5, 2, 8, 3, 0});
  const Tensor y = maxpool1d(tape.constant(x), 3, 1).value();
  EXPECT_EQ(y, Tensor({1, 1, 4}, {5, 8, 8, 8}));
  EXPECT_THROW(maxpool1d(tape.constant(x), 7, 1), std::invalid_argument);
}

TEST(Ops, InterleaveInvertsStridedSplit) {
  Tape tape;
  const Tensor x = random_tensor({2, 3, 8}, 5);
  Var v = tape.constant(x);
  EXPECT_EQ(interleave_last(take_stride_last(v, 0, 2), take_stride_last(v, 1, 2)).value(), x);
}

TEST(Ops, PadReplicateCopiesEdges) {
  Tape tape;
  const Tensor y = pad_replicate_last(tape.constant(Tensor({1, 1, 3}, {1, 2, 3})), 2, 1).value();
  EXPECT_EQ(y, Tensor({1, 1, 6}, {1, 1, 1, 2, 3, 3}));
}

TEST(Ops, DropoutKeepsExpectationAndRejectsBadRate) {
  Tape tape;
  Rng rng(7);
  const Tensor ones({20000}, 1.0);
  const Tensor y = dropout(tape.constant(ones), 0.5, true, rng).value();
  double s = 0;
  std::size_t zeros = 0;
  for (double v : y.data()) {
    s += v;
    zeros += v == 0.0;
    if (v != 0.0) EXPECT_DOUBLE_EQ(v, 2.0);
  }
  EXPECT_NEAR(s / 20000, 1.0, 0.03);
  EXPECT_NEAR(static_cast<double>(zeros) / 20000, 0.5, 0.02);
  EXPECT_EQ(dropout(tape.constant(ones), 0.5, false, rng).value(), ones);
  EXPECT_THROW(dropout(tape.constant(ones), 1.0, true, rng), std::invalid_argument);
}

TEST(Ops, NormalizeRowsGivesUnitNormAndKeepsZeroRows) {
  Tape tape;
  Tensor x = random_tensor({3, 4}, 8);
  for (std::size_t k = 0; k < 4; ++k) x.at(1, k) = 0.0;
  const Tensor y = normalize_rows(tape.constant(x)).value();
  for (std::size_t r : {0u, 2u}) {
    double n = 0;
    for (std::size_t k = 0; k < 4; ++k) n += y.at(r, k) * y.at(r, k);
    EXPECT_NEAR(n, 1.0, 1e-12);
  }
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(y.at(1, k), 0.0);
}

TEST(Ops, ShapeMismatchesThrow) {
  Tape tape;
  Var a = tape.constant(Tensor({2, 3}));
  Var b = tape.constant(Tensor({3, 2}));
  EXPECT_THROW(add(a, b), std::invalid_argument);
  EXPECT_THROW(linear(a, tape.constant(Tensor({2, 2}))), std::invalid_argument);
  EXPECT_THROW(bmm(tape.constant(Tensor({1, 2, 3})), tape.constant(Tensor({1, 2, 3}))), std::invalid_argument);
}

TEST(Layers, LstmOutputShapeAndCausality) {
  ParameterSet ps;
  Rng rng(1);
  LstmStack lstm(ps, "l", 3, 5, 2, 0.0, rng);
  Tensor x = random_tensor({1, 6, 3}, 9);
  Tape t1;
  const Tensor y1 = lstm.forward(t1, t1.constant(x), false, rng).value();
  EXPECT_EQ(y1.shape(), (Shape{1, 6, 5}));
  // Changing the last step must not affect earlier outputs.
  for (std::size_t k = 0; k < 3; ++k) x.at(0, 5, k) += 1.0;
  Tape t2;
  const Tensor y2 = lstm.forward(t2, t2.constant(x), false, rng).value();
  for (std::size_t i = 0; i < 5 * 5; ++i) EXPECT_EQ(y1[i], y2[i]);
}

TEST(Layers, AttentionWeightsAreRowStochastic) {
  ParameterSet ps;
  Rng rng(2);
  SelfAttention att(ps, "a", 4, rng);
  Tape tape;
  const Tensor w = att.weights(tape, tape.constant(random_tensor({2, 5, 4}, 10))).value();
  EXPECT_EQ(w.shape(), (Shape{2, 5, 5}));
  for (std::size_t r = 0; r < 10; ++r) {
    double s = 0;
    for (std::size_t k = 0; k < 5; ++k) s += w[r * 5 + k];
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}
