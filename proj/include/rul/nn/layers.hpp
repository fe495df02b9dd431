#pragma once

#include <string>
#include <vector>

#include "rul/nn/autograd.hpp"
#include "rul/nn/ops.hpp"

namespace rul::nn {

/// Uniform U(-bound, bound) tensor.
Tensor uniform_tensor(Shape shape, double bound, Rng& rng);

/// y = x W + b over the last axis. Weights are U(-1/sqrt(in), 1/sqrt(in)).
class Linear {
 public:
  Linear() = default;
  Linear(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng);

  Var operator()(Tape& tape, const Var& x) const;

  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }
  Parameter& weight() const { return *w_; }
  Parameter& bias() const { return *b_; }

 private:
  Parameter* w_ = nullptr;
  Parameter* b_ = nullptr;
  std::size_t in_ = 0;
  std::size_t out_ = 0;
};

/// Stacked LSTM over [B, L, d_in] with zero initial state; returns the top
/// layer's hidden states [B, L, hidden]. Gate order in the fused weights is
/// input, forget, cell candidate, output. Dropout acts between layers only.
class LstmStack {
 public:
  LstmStack() = default;
  LstmStack(ParameterSet& params, const std::string& name, std::size_t input_size,
            std::size_t hidden_size, std::size_t layers, double dropout, Rng& rng);

  Var forward(Tape& tape, const Var& seq, bool training, Rng& rng) const;

  std::size_t hidden_size() const { return hidden_; }
  std::size_t layer_count() const { return layers_.size(); }

 private:
  struct Layer {
    Parameter* w_input;   // [d_in, 4h]
    Parameter* w_hidden;  // [h, 4h]
    Parameter* bias;      // [4h]
  };
  std::vector<Layer> layers_;
  std::size_t hidden_ = 0;
  double dropout_ = 0.0;
};

/// Single-head scaled dot-product self-attention, softmax(Q K^T / sqrt(d)) V,
/// over the middle axis of [B, L, d]. No output projection, no positional code.
class SelfAttention {
 public:
  SelfAttention() = default;
  SelfAttention(ParameterSet& params, const std::string& name, std::size_t dim, Rng& rng);

  Var operator()(Tape& tape, const Var& x) const;
  /// Attention weights [B, L, L] for inspection.
  Var weights(Tape& tape, const Var& x) const;

  const Linear& value_projection() const { return value_; }

 private:
  Linear query_;
  Linear key_;
  Linear value_;
  std::size_t dim_ = 0;
};

/// 1-D convolution over [B, C_in, L] with no padding.
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(ParameterSet& params, const std::string& name, std::size_t in_channels,
         std::size_t out_channels, std::size_t kernel, std::size_t stride, Rng& rng);

  Var operator()(Tape& tape, const Var& x) const;

  Parameter& weight() const { return *w_; }
  Parameter& bias() const { return *b_; }
  std::size_t kernel() const { return kernel_; }
  std::size_t stride() const { return stride_; }

 private:
  Parameter* w_ = nullptr;
  Parameter* b_ = nullptr;
  std::size_t kernel_ = 0;
  std::size_t stride_ = 1;
};

}  // namespace rul::nn
