#include "rul/models/architectures.hpp"

#include <stdexcept>

namespace rul::models {

LstmBaseline::LstmBaseline(ModelConfig config) : Model(std::move(config)) {
  nn::Rng rng(config_.init_seed);
  lstm_ = nn::LstmStack(params_, "lstm", config_.sensors, config_.lstm_hidden, config_.lstm_layers,
                        config_.lstm_dropout, rng);
  fc1_ = nn::Linear(params_, "head.fc1", flatten_dim(), config_.lstm_head, rng);
  fc2_ = nn::Linear(params_, "head.fc2", config_.lstm_head, 1, rng);
}

ForwardOutput LstmBaseline::forward_impl(nn::Tape& tape, const nn::Var& windows, const ForwardOptions& options,
                                         nn::Rng& rng) const {
  const bool train = options.training;
  nn::Var seq = lstm_.forward(tape, windows, train, rng);
  nn::Var flat = nn::reshape(seq, {windows.dim(0), flatten_dim()});
  nn::Var h = nn::dropout(nn::relu(fc1_(tape, flat)), config_.lstm_dropout, train, rng);
  return ForwardOutput{fc2_(tape, h), {}, {}, {}};
}

std::vector<std::size_t> cnn_stage_lengths(const ModelConfig& c) {
  const std::size_t stages = c.cnn_kernels.size();
  if (c.cnn_channels.size() != stages || c.cnn_strides.size() != stages || c.cnn_pool_kernels.size() != stages ||
      c.cnn_pool_strides.size() != stages) {
    throw std::invalid_argument("cnn: per-stage settings must have equal lengths");
  }
  std::vector<std::size_t> lengths{c.window};
  for (std::size_t s = 0; s < stages; ++s) {
    lengths.push_back(nn::window_out_len(lengths.back(), c.cnn_kernels[s], c.cnn_strides[s]));
    lengths.push_back(nn::window_out_len(lengths.back(), c.cnn_pool_kernels[s], c.cnn_pool_strides[s]));
  }
  return lengths;
}

CnnBaseline::CnnBaseline(ModelConfig config) : Model(std::move(config)) {
  nn::Rng rng(config_.init_seed);
  const auto lengths = cnn_stage_lengths(config_);
  std::size_t channels = config_.sensors;
  for (std::size_t s = 0; s < config_.cnn_kernels.size(); ++s) {
    convs_.emplace_back(params_, "conv" + std::to_string(s), channels, config_.cnn_channels[s], config_.cnn_kernels[s],
                        config_.cnn_strides[s], rng);
    channels = config_.cnn_channels[s];
  }
  flatten_ = channels * lengths.back();
  std::size_t in = flatten_;
  for (std::size_t k = 0; k < config_.cnn_mlp.size(); ++k) {
    mlp_.emplace_back(params_, "head.fc" + std::to_string(k + 1), in, config_.cnn_mlp[k], rng);
    in = config_.cnn_mlp[k];
  }
  mlp_.emplace_back(params_, "head.out", in, 1, rng);
}

ForwardOutput CnnBaseline::forward_impl(nn::Tape& tape, const nn::Var& windows, const ForwardOptions& options,
                                        nn::Rng& rng) const {
  nn::Var x = nn::transpose12(windows);  // [B, sensors, W]
  for (std::size_t s = 0; s < convs_.size(); ++s) {
    x = nn::maxpool1d(nn::relu(convs_[s](tape, x)), config_.cnn_pool_kernels[s], config_.cnn_pool_strides[s]);
  }
  x = nn::reshape(x, {windows.dim(0), flatten_});
  for (std::size_t k = 0; k + 1 < mlp_.size(); ++k) {
    x = nn::dropout(nn::relu(mlp_[k](tape, x)), config_.cnn_dropout, options.training, rng);
  }
  return ForwardOutput{mlp_.back()(tape, x), {}, {}, {}};
}

TimeFeatureModel::TimeFeatureModel(ModelConfig config) : Model(std::move(config)) {
  nn::Rng rng(config_.init_seed);
  extractor_ = TimeFeatureExtractor(params_, "tfm0", config_, rng);
  head_ = RegressionHead(params_, "head", config_.latent_dim(), config_.head_hidden, config_.head_dropout, rng);
}

ForwardOutput TimeFeatureModel::forward_impl(nn::Tape& tape, const nn::Var& windows, const ForwardOptions& options,
                                             nn::Rng& rng) const {
  nn::Var latent = extractor_(tape, windows, options.training, rng);
  if (!options.zero_mask.empty() && options.zero_mask[0]) latent = zero_latent(tape, latent);
  nn::Var pred = head_(tape, latent, options.training, rng);
  return ForwardOutput{pred, {pred}, {latent}, {}};
}

InteractionModel::InteractionModel(ModelConfig config) : Model(std::move(config)) {
  if (config_.arch != Architecture::Dtfm && config_.arch != Architecture::Tfim) {
    throw std::invalid_argument("InteractionModel supports dtfm and tfim only");
  }
  nn::Rng rng(config_.init_seed);
  tfm_blocks_.emplace_back(params_, "tfm0", config_, rng);
  tfm_blocks_.emplace_back(params_, "tfm1", config_, rng);
  if (config_.arch == Architecture::Tfim) scinet_blocks_.emplace_back(params_, "scinet", config_, rng);
  for (std::size_t k = 0; k < block_count(); ++k) {
    block_heads_.emplace_back(params_, "block_head" + std::to_string(k), config_.latent_dim(), config_.head_dropout,
                              rng);
  }
  fusion_ = nn::SelfAttention(params_, "fusion", config_.latent_dim(), rng);
  head_ = RegressionHead(params_, "head", fused_dim(), config_.head_hidden, config_.head_dropout, rng);
}

ForwardOutput InteractionModel::forward_impl(nn::Tape& tape, const nn::Var& windows, const ForwardOptions& options,
                                             nn::Rng& rng) const {
  const bool train = options.training;
  ForwardOutput out;
  for (const auto& block : tfm_blocks_) out.block_latents.push_back(block(tape, windows, train, rng));
  for (const auto& block : scinet_blocks_) {
    auto s = block(tape, windows, train, rng);
    out.block_latents.push_back(s.latent);
    for (auto& p : s.skip_preds) out.skip_predictions.push_back(p);
  }
  for (std::size_t k = 0; k < out.block_latents.size(); ++k) {
    if (!options.zero_mask.empty() && options.zero_mask[k]) out.block_latents[k] = zero_latent(tape, out.block_latents[k]);
    out.block_predictions.push_back(block_heads_[k](tape, out.block_latents[k], train, rng));
  }
  nn::Var tokens = nn::stack_steps(out.block_latents);  // [B, blocks, latent]
  nn::Var fused = nn::reshape(fusion_(tape, tokens), {windows.dim(0), fused_dim()});
  out.prediction = head_(tape, fused, train, rng);
  return out;
}

}  // namespace rul::models
