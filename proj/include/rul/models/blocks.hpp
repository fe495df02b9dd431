#pragma once

#include <string>
#include <vector>

#include "rul/models/model.hpp"
#include "rul/nn/layers.hpp"

namespace rul::models {

/// Transposes the window so each sensor is one token of length W, runs a
/// stacked LSTM (hidden = W) with an additive skip from its input, applies
/// self-attention across the sensor tokens and flattens to a unit-norm
/// latent of size sensors * W.
class TimeFeatureExtractor {
 public:
  TimeFeatureExtractor() = default;
  TimeFeatureExtractor(nn::ParameterSet& params, const std::string& name, const ModelConfig& cfg, nn::Rng& rng);

  /// Un-normalized flattened features [B, sensors * W].
  nn::Var features(nn::Tape& tape, const nn::Var& windows, bool training, nn::Rng& rng) const;
  nn::Var operator()(nn::Tape& tape, const nn::Var& windows, bool training, nn::Rng& rng) const;

 private:
  nn::LstmStack lstm_;
  nn::SelfAttention attention_;
};

/// One even/odd exchange of the SCINet tree. Four small convolutional
/// filters (replicate pad, conv sensors->hidden, LeakyReLU, dropout,
/// conv hidden->sensors, tanh) drive a scaling step followed by an
/// additive step between the two half-sequences.
class ScinetInteractor {
 public:
  ScinetInteractor() = default;
  ScinetInteractor(nn::ParameterSet& params, const std::string& name, const ModelConfig& cfg, nn::Rng& rng);

  std::pair<nn::Var, nn::Var> operator()(nn::Tape& tape, const nn::Var& even, const nn::Var& odd, bool training,
                                         nn::Rng& rng) const;

 private:
  struct Filter {
    nn::Conv1d expand;
    nn::Conv1d project;
  };
  nn::Var apply(nn::Tape& tape, const Filter& f, const nn::Var& x, bool training, nn::Rng& rng) const;

  Filter phi_, psi_, update_, predict_;
  std::size_t pad_ = 0;
  double dropout_ = 0.0;
};

/// Hierarchical even/odd decomposition of depth `levels` over [B, C, L];
/// each tree node owns its interactor. Leaves are re-interleaved.
class ScinetTree {
 public:
  ScinetTree() = default;
  ScinetTree(nn::ParameterSet& params, const std::string& name, const ModelConfig& cfg, nn::Rng& rng);

  nn::Var operator()(nn::Tape& tape, const nn::Var& x, bool training, nn::Rng& rng) const;

 private:
  nn::Var node(nn::Tape& tape, const nn::Var& x, std::size_t level, std::size_t index, bool training,
               nn::Rng& rng) const;

  std::size_t levels_ = 0;
  std::vector<ScinetInteractor> interactors_;  // heap order: node i has children 2i+1, 2i+2
};

/// dropout -> Linear(latent, 1) -> SiLU.
class BlockHead {
 public:
  BlockHead() = default;
  BlockHead(nn::ParameterSet& params, const std::string& name, std::size_t in, double dropout, nn::Rng& rng);
  nn::Var operator()(nn::Tape& tape, const nn::Var& latent, bool training, nn::Rng& rng) const;

 private:
  nn::Linear fc_;
  double dropout_ = 0.0;
};

/// Stacked SCINet trees with residual connections. Between stacks the
/// intermediate representation is normalized and fed to a RUL skip head.
class ScinetExtractor {
 public:
  ScinetExtractor() = default;
  ScinetExtractor(nn::ParameterSet& params, const std::string& name, const ModelConfig& cfg, nn::Rng& rng);

  struct Output {
    nn::Var latent;                  // [B, sensors * W], unit-norm
    std::vector<nn::Var> skip_preds;  // one per intermediate tap
    nn::Var sequence;                // final [B, sensors, W] before flattening
  };
  Output operator()(nn::Tape& tape, const nn::Var& windows, bool training, nn::Rng& rng) const;

 private:
  std::vector<ScinetTree> stacks_;
  std::vector<BlockHead> skip_heads_;
};

/// Linear(in, hidden) -> SiLU -> dropout -> Linear(hidden, 1).
class RegressionHead {
 public:
  RegressionHead() = default;
  RegressionHead(nn::ParameterSet& params, const std::string& name, std::size_t in, std::size_t hidden,
                 double dropout, nn::Rng& rng);
  nn::Var operator()(nn::Tape& tape, const nn::Var& x, bool training, nn::Rng& rng) const;

 private:
  nn::Linear fc1_;
  nn::Linear fc2_;
  double dropout_ = 0.0;
};

/// Replaces the rows of a [B, D] latent with zeros.
nn::Var zero_latent(nn::Tape& tape, const nn::Var& latent);

}  // namespace rul::models
