#include "rul/models/blocks.hpp"

#include <stdexcept>

namespace rul::models {

TimeFeatureExtractor::TimeFeatureExtractor(nn::ParameterSet& params, const std::string& name,
                                           const ModelConfig& cfg, nn::Rng& rng)
    : lstm_(params, name + ".lstm", cfg.window, cfg.window, cfg.tfm_layers, cfg.tfm_dropout, rng),
      attention_(params, name + ".attention", cfg.window, rng) {}

nn::Var TimeFeatureExtractor::features(nn::Tape& tape, const nn::Var& windows, bool training,
                                       nn::Rng& rng) const {
  nn::Var tokens = nn::transpose12(windows);  // [B, sensors, W]
  nn::Var seq = nn::add(lstm_.forward(tape, tokens, training, rng), tokens);
  nn::Var attended = attention_(tape, seq);
  return nn::reshape(attended, {windows.dim(0), windows.dim(1) * windows.dim(2)});
}

nn::Var TimeFeatureExtractor::operator()(nn::Tape& tape, const nn::Var& windows, bool training,
                                         nn::Rng& rng) const {
  return nn::normalize_rows(features(tape, windows, training, rng));
}

ScinetInteractor::ScinetInteractor(nn::ParameterSet& params, const std::string& name, const ModelConfig& cfg,
                                   nn::Rng& rng)
    : pad_(cfg.scinet_kernel - 1), dropout_(cfg.scinet_dropout) {
  auto make = [&](const std::string& tag) {
    return Filter{
        nn::Conv1d(params, name + "." + tag + ".expand", cfg.sensors, cfg.scinet_hidden, cfg.scinet_kernel, 1, rng),
        nn::Conv1d(params, name + "." + tag + ".project", cfg.scinet_hidden, cfg.sensors, cfg.scinet_kernel, 1, rng)};
  };
  phi_ = make("phi");
  psi_ = make("psi");
  update_ = make("update");
  predict_ = make("predict");
}

nn::Var ScinetInteractor::apply(nn::Tape& tape, const Filter& f, const nn::Var& x, bool training,
                                nn::Rng& rng) const {
  nn::Var h = f.expand(tape, nn::pad_replicate_last(x, pad_, pad_));
  h = nn::dropout(nn::leaky_relu(h, 0.01), dropout_, training, rng);
  return nn::tanh(f.project(tape, h));
}

std::pair<nn::Var, nn::Var> ScinetInteractor::operator()(nn::Tape& tape, const nn::Var& even, const nn::Var& odd,
                                                         bool training, nn::Rng& rng) const {
  nn::Var d = nn::mul(odd, nn::exp(apply(tape, phi_, even, training, rng)));
  nn::Var c = nn::mul(even, nn::exp(apply(tape, psi_, odd, training, rng)));
  nn::Var even_out = nn::add(c, apply(tape, update_, d, training, rng));
  nn::Var odd_out = nn::sub(d, apply(tape, predict_, c, training, rng));
  return {even_out, odd_out};
}

ScinetTree::ScinetTree(nn::ParameterSet& params, const std::string& name, const ModelConfig& cfg, nn::Rng& rng)
    : levels_(cfg.scinet_levels) {
  if (levels_ == 0) throw std::invalid_argument("SCINet tree needs at least one level");
  const std::size_t nodes = (std::size_t{1} << levels_) - 1;
  for (std::size_t i = 0; i < nodes; ++i) {
    interactors_.emplace_back(params, name + ".node" + std::to_string(i), cfg, rng);
  }
}

nn::Var ScinetTree::node(nn::Tape& tape, const nn::Var& x, std::size_t level, std::size_t index, bool training,
                         nn::Rng& rng) const {
  const std::size_t len = x.shape().back();
  if (len < 2) throw std::invalid_argument("SCINet: sequence too short for the requested number of levels");
  // Odd lengths borrow one replicated element that is dropped after merging.
  const bool odd_len = len % 2 == 1;
  nn::Var input = odd_len ? nn::pad_replicate_last(x, 0, 1) : x;
  auto [even, odd] = interactors_[index](tape, nn::take_stride_last(input, 0, 2), nn::take_stride_last(input, 1, 2),
                                         training, rng);
  if (level + 1 < levels_) {
    even = node(tape, even, level + 1, 2 * index + 1, training, rng);
    odd = node(tape, odd, level + 1, 2 * index + 2, training, rng);
  }
  nn::Var merged = nn::interleave_last(even, odd);
  return odd_len ? nn::slice_last(merged, 0, len) : merged;
}

nn::Var ScinetTree::operator()(nn::Tape& tape, const nn::Var& x, bool training, nn::Rng& rng) const {
  return node(tape, x, 0, 0, training, rng);
}

ScinetExtractor::ScinetExtractor(nn::ParameterSet& params, const std::string& name, const ModelConfig& cfg,
                                 nn::Rng& rng) {
  if (cfg.scinet_stacks == 0) throw std::invalid_argument("SCINet needs at least one stack");
  for (std::size_t s = 0; s < cfg.scinet_stacks; ++s) {
    stacks_.emplace_back(params, name + ".stack" + std::to_string(s), cfg, rng);
    if (s + 1 < cfg.scinet_stacks) {
      skip_heads_.emplace_back(params, name + ".skip" + std::to_string(s), cfg.latent_dim(), cfg.head_dropout, rng);
    }
  }
}

ScinetExtractor::Output ScinetExtractor::operator()(nn::Tape& tape, const nn::Var& windows, bool training,
                                                    nn::Rng& rng) const {
  const std::size_t B = windows.dim(0);
  const std::size_t flat = windows.dim(1) * windows.dim(2);
  Output out;
  nn::Var x = nn::transpose12(windows);  // [B, sensors, W]
  for (std::size_t s = 0; s < stacks_.size(); ++s) {
    x = nn::add(stacks_[s](tape, x, training, rng), x);
    if (s < skip_heads_.size()) {
      nn::Var tap = nn::normalize_rows(nn::reshape(x, {B, flat}));
      out.skip_preds.push_back(skip_heads_[s](tape, tap, training, rng));
    }
  }
  out.sequence = x;
  out.latent = nn::normalize_rows(nn::reshape(x, {B, flat}));
  return out;
}

BlockHead::BlockHead(nn::ParameterSet& params, const std::string& name, std::size_t in, double dropout,
                     nn::Rng& rng)
    : fc_(params, name, in, 1, rng), dropout_(dropout) {}

nn::Var BlockHead::operator()(nn::Tape& tape, const nn::Var& latent, bool training, nn::Rng& rng) const {
  return nn::silu(fc_(tape, nn::dropout(latent, dropout_, training, rng)));
}

RegressionHead::RegressionHead(nn::ParameterSet& params, const std::string& name, std::size_t in,
                               std::size_t hidden, double dropout, nn::Rng& rng)
    : fc1_(params, name + ".fc1", in, hidden, rng), fc2_(params, name + ".fc2", hidden, 1, rng), dropout_(dropout) {}

nn::Var RegressionHead::operator()(nn::Tape& tape, const nn::Var& x, bool training, nn::Rng& rng) const {
  nn::Var h = nn::dropout(nn::silu(fc1_(tape, x)), dropout_, training, rng);
  return fc2_(tape, h);
}

nn::Var zero_latent(nn::Tape& tape, const nn::Var& latent) {
  return nn::mul(latent, tape.constant(nn::Tensor(latent.shape(), 0.0)));
}

}  // namespace rul::models
