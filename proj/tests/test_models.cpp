#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

#include "rul/losses.hpp"
#include "rul/models/architectures.hpp"
#include "support/grad_cases.hpp"

using namespace rul;
using namespace rul::models;
using rul::testing::random_tensor;

namespace {

ModelConfig config_for(Architecture arch, std::size_t window = 32) {
  ModelConfig c;
  c.arch = arch;
  c.window = window;
  return c;
}

ForwardOutput run(const Model& m, nn::Tape& tape, const nn::Tensor& x, std::vector<bool> mask = {},
                  bool training = false, std::uint64_t seed = 0) {
  ForwardOptions o;
  o.training = training;
  o.zero_mask = std::move(mask);
  nn::Rng rng(seed);
  return m.forward(tape, tape.constant(x), o, rng);
}

/// Copies every parameter under `from.` onto the same name under `to.`.
void copy_block(nn::ParameterSet& ps, const std::string& from, const std::string& to) {
  for (auto* p : ps.all()) {
    if (p->name.rfind(from + ".", 0) == 0) ps.find(to + p->name.substr(from.size()))->value = p->value;
  }
}

}  // namespace

TEST(Models, EveryArchitectureMapsWindowsToScalars) {
  for (auto arch : {Architecture::Lstm, Architecture::Cnn, Architecture::Tfm, Architecture::Dtfm, Architecture::Tfim}) {
    auto m = make_model(config_for(arch));
    nn::Tape tape;
    const auto out = run(*m, tape, random_tensor({3, 32, 21}, 1));
    EXPECT_EQ(out.prediction.shape(), (nn::Shape{3, 1})) << to_string(arch);
    EXPECT_EQ(out.block_predictions.size(), m->block_count());
    EXPECT_EQ(out.block_latents.size(), m->block_count());
    for (double v : out.prediction.value().data()) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(Models, RejectsWrongInputShapeAndMask) {
  auto m = make_model(config_for(Architecture::Tfim));
  nn::Tape tape;
  EXPECT_THROW(run(*m, tape, random_tensor({2, 31, 21}, 1)), std::invalid_argument);
  EXPECT_THROW(run(*m, tape, random_tensor({2, 32, 21}, 1), {true, false}), std::invalid_argument);
  EXPECT_THROW(parse_architecture("gru"), std::invalid_argument);
}

TEST(LstmBaseline, FlattenSizeAndDeterminism) {
  LstmBaseline m(config_for(Architecture::Lstm));
  EXPECT_EQ(m.flatten_dim(), 32u * 21u);
  const auto x = random_tensor({2, 32, 21}, 2);
  nn::Tape a, b;
  EXPECT_EQ(run(m, a, x).prediction.value(), run(m, b, x).prediction.value());
}

TEST(CnnBaseline, StageLengthsAndGradientsReachKernels) {
  const auto lengths = cnn_stage_lengths(config_for(Architecture::Cnn));
  EXPECT_EQ(lengths, (std::vector<std::size_t>{32, 26, 12, 10, 8}));
  CnnBaseline m(config_for(Architecture::Cnn));
  EXPECT_EQ(m.flatten_dim(), 80u);
  nn::Tape tape;
  tape.backward(nn::sum(run(m, tape, random_tensor({4, 32, 21}, 3)).prediction));
  for (const char* name : {"conv0.weight", "conv1.weight"}) {
    const auto* p = m.params().find(name);
    ASSERT_NE(p, nullptr) << name;
    EXPECT_TRUE(std::any_of(p->grad.data().begin(), p->grad.data().end(), [](double g) { return g != 0.0; })) << name;
  }
  EXPECT_EQ(nn::window_out_len(26, 3, 2), 12u);
}

TEST(TimeFeatureModel, LatentSizeUnitNormAndNotTransposeInvariant) {
  for (std::size_t W : {32u, 40u}) {
    TimeFeatureModel m(config_for(Architecture::Tfm, W));
    nn::Tape tape;
    const auto out = run(m, tape, random_tensor({2, W, 21}, 4));
    ASSERT_EQ(out.block_latents.size(), 1u);
    EXPECT_EQ(out.block_latents[0].shape(), (nn::Shape{2, 21 * W}));
    const auto& z = out.block_latents[0].value();
    double n = 0;
    for (std::size_t k = 0; k < 21 * W; ++k) n += z[k] * z[k];
    EXPECT_NEAR(n, 1.0, 1e-12);
    EXPECT_EQ(out.block_predictions[0].value(), out.prediction.value());
  }
  // Swapping time and sensor axes of a square window changes the output.
  ModelConfig sq = config_for(Architecture::Tfm, 21);
  TimeFeatureModel m(sq);
  const auto x = random_tensor({1, 21, 21}, 5);
  nn::Tensor xt({1, 21, 21});
  for (std::size_t i = 0; i < 21; ++i)
    for (std::size_t j = 0; j < 21; ++j) xt.at(0, i, j) = x.at(0, j, i);
  nn::Tape a, b;
  EXPECT_NE(run(m, a, x).prediction.value(), run(m, b, xt).prediction.value());
}

TEST(InteractionModel, FusedDimensions) {
  InteractionModel d(config_for(Architecture::Dtfm));
  EXPECT_EQ(d.fused_dim(), 1344u);
  InteractionModel t(config_for(Architecture::Tfim));
  EXPECT_EQ(t.fused_dim(), 2016u);
  EXPECT_EQ(t.params().find("head.fc1.weight")->value.dim(0), 2016u);
  EXPECT_THROW(InteractionModel(config_for(Architecture::Tfm)), std::invalid_argument);
}

TEST(InteractionModel, IdenticalBlocksGiveEqualLatentsAndMcosineTwo) {
  ModelConfig c = config_for(Architecture::Dtfm);
  c.tfm_dropout = c.head_dropout = 0.0;
  InteractionModel m(c);
  copy_block(m.params(), "tfm0", "tfm1");
  nn::Tape tape;
  const auto out = run(m, tape, random_tensor({3, 32, 21}, 6), {}, true);
  EXPECT_EQ(out.block_latents[0].value(), out.block_latents[1].value());
  EXPECT_NEAR(mcosine_loss(out.block_latents).value()[0], 2.0, 1e-12);
}

TEST(InteractionModel, ZeroMaskBehaviour) {
  InteractionModel m(config_for(Architecture::Tfim));
  const auto x = random_tensor({2, 32, 21}, 7);
  nn::Tape t0, t1, t2, t3;
  const auto base = run(m, t0, x).prediction.value();
  EXPECT_EQ(run(m, t1, x, {false, false, false}).prediction.value(), base);
  const auto one = run(m, t2, x, {false, false, true});
  EXPECT_NE(one.prediction.value(), base);
  for (double v : one.block_latents[2].value().data()) EXPECT_EQ(v, 0.0);
  const auto all = run(m, t3, x, {true, true, true});
  for (double v : all.prediction.value().data()) EXPECT_TRUE(std::isfinite(v));
}

TEST(InteractionModel, TfimExposesSkipPredictions) {
  InteractionModel m(config_for(Architecture::Tfim));
  nn::Tape tape;
  const auto out = run(m, tape, random_tensor({2, 32, 21}, 8));
  EXPECT_EQ(out.skip_predictions.size(), 1u);
  EXPECT_EQ(out.block_latents[2].shape(), (nn::Shape{2, 672}));
}

TEST(Scinet, ZeroFiltersMakeTreeIdentity) {
  ModelConfig c = config_for(Architecture::Tfim);
  nn::ParameterSet ps;
  nn::Rng rng(1);
  ScinetTree tree(ps, "tree", c, rng);
  for (auto* p : ps.all()) p->value.fill(0.0);
  for (std::size_t L : {32u, 40u}) {
    nn::Tape tape;
    const auto x = random_tensor({2, 21, L}, 9);
    EXPECT_EQ(tree(tape, tape.constant(x), false, rng).value(), x) << L;
    nn::Tape zt;
    const nn::Tensor zero({1, 21, L}, 0.0);
    EXPECT_EQ(tree(zt, zt.constant(zero), false, rng).value(), zero);
  }
}

TEST(Scinet, ChangingOneInputChangesOutputAcrossHalves) {
  ModelConfig c = config_for(Architecture::Tfim);
  nn::ParameterSet ps;
  nn::Rng rng(2);
  ScinetTree tree(ps, "tree", c, rng);
  auto x = random_tensor({1, 21, 32}, 10);
  nn::Tape a;
  const auto y0 = tree(a, a.constant(x), false, rng).value();
  x.at(0, 0, 0) += 0.5;  // an even position
  nn::Tape b;
  const auto y1 = tree(b, b.constant(x), false, rng).value();
  EXPECT_NE(y0.at(0, 0, 1), y1.at(0, 0, 1));  // reaches an odd position
}

TEST(Models, ConfigJsonRoundTripAndHash) {
  ModelConfig c = config_for(Architecture::Tfim, 40);
  c.scinet_hidden = 12;
  const ModelConfig back = nlohmann::json(c).get<ModelConfig>();
  EXPECT_EQ(back, c);
  ModelConfig other = c;
  other.init_seed = 99;
  EXPECT_NE(config_hash(c), config_hash(other));
  EXPECT_EQ(config_hash(c), config_hash(back));
}

TEST(Models, PredictBatchDoesNotChangeParameters) {
  auto m = make_model(config_for(Architecture::Dtfm));
  std::vector<nn::Tensor> before;
  for (auto* p : m->params().all()) before.push_back(p->value);
  predict_batch(*m, random_tensor({2, 32, 21}, 11));
  std::size_t i = 0;
  for (auto* p : m->params().all()) EXPECT_EQ(p->value, before[i++]);
}

TEST(Models, InitialisationDependsOnSeedOnly) {
  ModelConfig c = config_for(Architecture::Tfm);
  auto a = make_model(c), b = make_model(c);
  c.init_seed = 2;
  auto d = make_model(c);
  EXPECT_EQ(a->params().all()[0]->value, b->params().all()[0]->value);
  EXPECT_NE(a->params().all()[0]->value, d->params().all()[0]->value);
}

TEST(EndToEnd, TinyModelGradientsMatchFiniteDifferences) {
  for (auto arch : {Architecture::Tfm, Architecture::Dtfm, Architecture::Tfim}) {
    EXPECT_LT(rul::testing::end_to_end_grad_error(arch), 1e-3) << to_string(arch);
  }
}

TEST(EndToEnd, BaselineGradientsMatchFiniteDifferences) {
  for (auto arch : {Architecture::Lstm, Architecture::Cnn}) {
    ModelConfig c;
    c.arch = arch;
    c.window = 20;
    c.sensors = 3;
    c.lstm_hidden = 3;
    c.lstm_layers = 2;
    c.lstm_head = 5;
    c.cnn_mlp = {6, 4};
    auto m = make_model(c);
    const auto x = random_tensor({2, 20, 3}, 12);
    const nn::Tensor target({2, 1}, {1.5, -0.5});
    const double err = rul::testing::max_param_grad_error(m->params().all(), [&](nn::Tape& tape) {
      nn::Rng rng(0);
      const auto out = m->forward(tape, tape.constant(x), {}, rng);
      return huber_loss(out.prediction, tape.constant(target));
    });
    EXPECT_LT(err, 1e-3) << to_string(arch);
  }
}
