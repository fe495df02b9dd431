#pragma once

#include <vector>

#include "rul/models/blocks.hpp"
#include "rul/models/model.hpp"

namespace rul::models {

/// Stacked LSTM over time -> flatten -> Linear -> ReLU -> dropout -> Linear.
class LstmBaseline final : public Model {
 public:
  explicit LstmBaseline(ModelConfig config);
  std::size_t flatten_dim() const { return config_.window * config_.lstm_hidden; }

 protected:
  ForwardOutput forward_impl(nn::Tape& tape, const nn::Var& windows, const ForwardOptions& options,
                             nn::Rng& rng) const override;

 private:
  nn::LstmStack lstm_;
  nn::Linear fc1_;
  nn::Linear fc2_;
};

/// Sequence lengths after each conv and pool stage, starting with the window.
std::vector<std::size_t> cnn_stage_lengths(const ModelConfig& config);

/// (conv -> ReLU -> maxpool) per stage over the time axis with sensors as
/// channels, then an MLP with ReLU and dropout.
class CnnBaseline final : public Model {
 public:
  explicit CnnBaseline(ModelConfig config);
  std::size_t flatten_dim() const { return flatten_; }

 protected:
  ForwardOutput forward_impl(nn::Tape& tape, const nn::Var& windows, const ForwardOptions& options,
                             nn::Rng& rng) const override;

 private:
  std::vector<nn::Conv1d> convs_;
  std::vector<nn::Linear> mlp_;
  std::size_t flatten_ = 0;
};

/// One time-feature extractor followed by the regression head. The head
/// output doubles as the single block prediction.
class TimeFeatureModel final : public Model {
 public:
  explicit TimeFeatureModel(ModelConfig config);

 protected:
  ForwardOutput forward_impl(nn::Tape& tape, const nn::Var& windows, const ForwardOptions& options,
                             nn::Rng& rng) const override;

 private:
  TimeFeatureExtractor extractor_;
  RegressionHead head_;
};

/// Several extractor blocks, each with its own RUL head; the unit-norm
/// latents are treated as tokens, mixed by self-attention, concatenated and
/// regressed. DTFM uses two time-feature blocks, TFIM adds a SCINet block.
class InteractionModel final : public Model {
 public:
  explicit InteractionModel(ModelConfig config);

  std::size_t fused_dim() const { return block_count() * config_.latent_dim(); }

 protected:
  ForwardOutput forward_impl(nn::Tape& tape, const nn::Var& windows, const ForwardOptions& options,
                             nn::Rng& rng) const override;

 private:
  std::vector<TimeFeatureExtractor> tfm_blocks_;
  std::vector<ScinetExtractor> scinet_blocks_;
  std::vector<BlockHead> block_heads_;
  nn::SelfAttention fusion_;
  RegressionHead head_;
};

}  // namespace rul::models
