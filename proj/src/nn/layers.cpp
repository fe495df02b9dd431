#include "rul/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace rul::nn {

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

Linear::Linear(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng)
    : in_(in), out_(out) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  w_ = &params.create(name + ".weight", uniform_tensor({in, out}, bound, rng));
  b_ = &params.create(name + ".bias", uniform_tensor({out}, bound, rng));
}

Var Linear::operator()(Tape& tape, const Var& x) const {
  return linear(x, tape.param(*w_), tape.param(*b_));
}

LstmStack::LstmStack(ParameterSet& params, const std::string& name, std::size_t input_size,
                     std::size_t hidden_size, std::size_t layers, double dropout, Rng& rng)
    : hidden_(hidden_size), dropout_(dropout) {
  if (layers == 0 || hidden_size == 0) throw std::invalid_argument("LstmStack: empty configuration");
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_size));
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string prefix = name + ".l" + std::to_string(l);
    const std::size_t in = l == 0 ? input_size : hidden_size;
    Layer layer{};
    layer.w_input = &params.create(prefix + ".w_input", uniform_tensor({in, 4 * hidden_size}, bound, rng));
    layer.w_hidden =
        &params.create(prefix + ".w_hidden", uniform_tensor({hidden_size, 4 * hidden_size}, bound, rng));
    Tensor bias = uniform_tensor({4 * hidden_size}, bound, rng);
    for (std::size_t j = hidden_size; j < 2 * hidden_size; ++j) bias[j] = 1.0;  // forget gate
    layer.bias = &params.create(prefix + ".bias", std::move(bias));
    layers_.push_back(layer);
  }
}

Var LstmStack::forward(Tape& tape, const Var& seq, bool training, Rng& rng) const {
  if (seq.shape().size() != 3 || seq.dim(1) == 0) {
    throw std::invalid_argument("LstmStack: expected non-empty [B, L, d] input, got " +
                                shape_str(seq.shape()));
  }
  const std::size_t B = seq.dim(0), L = seq.dim(1), h = hidden_;
  Var x = seq;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (l > 0) x = dropout(x, dropout_, training, rng);
    const Layer& layer = layers_[l];
    // Input contributions for all steps in one product.
    Var projected = linear(x, tape.param(*layer.w_input), tape.param(*layer.bias));
    Var w_hidden = tape.param(*layer.w_hidden);
    Var hidden = tape.constant(Tensor({B, h}));
    Var cell = tape.constant(Tensor({B, h}));
    std::vector<Var> outputs;
    outputs.reserve(L);
    for (std::size_t t = 0; t < L; ++t) {
      Var gates = add(time_step(projected, t), linear(hidden, w_hidden));
      Var in_gate = sigmoid(slice_last(gates, 0, h));
      Var forget_gate = sigmoid(slice_last(gates, h, h));
      Var candidate = tanh(slice_last(gates, 2 * h, h));
      Var out_gate = sigmoid(slice_last(gates, 3 * h, h));
      cell = add(mul(forget_gate, cell), mul(in_gate, candidate));
      hidden = mul(out_gate, tanh(cell));
      outputs.push_back(hidden);
    }
    x = stack_steps(outputs);
  }
  return x;
}

SelfAttention::SelfAttention(ParameterSet& params, const std::string& name, std::size_t dim, Rng& rng)
    : query_(params, name + ".query", dim, dim, rng),
      key_(params, name + ".key", dim, dim, rng),
      value_(params, name + ".value", dim, dim, rng),
      dim_(dim) {}

Var SelfAttention::weights(Tape& tape, const Var& x) const {
  Var q = query_(tape, x);
  Var k = key_(tape, x);
  return softmax(scale(bmm_nt(q, k), 1.0 / std::sqrt(static_cast<double>(dim_))));
}

Var SelfAttention::operator()(Tape& tape, const Var& x) const {
  if (x.shape().size() != 3 || x.dim(2) != dim_) {
    throw std::invalid_argument("SelfAttention: expected [B, L, " + std::to_string(dim_) + "], got " +
                                shape_str(x.shape()));
  }
  return bmm(weights(tape, x), value_(tape, x));
}

Conv1d::Conv1d(ParameterSet& params, const std::string& name, std::size_t in_channels,
               std::size_t out_channels, std::size_t kernel, std::size_t stride, Rng& rng)
    : kernel_(kernel), stride_(stride) {
  if (stride == 0) throw std::invalid_argument("Conv1d: stride must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels * kernel));
  w_ = &params.create(name + ".weight", uniform_tensor({out_channels, in_channels, kernel}, bound, rng));
  b_ = &params.create(name + ".bias", uniform_tensor({out_channels}, bound, rng));
}

Var Conv1d::operator()(Tape& tape, const Var& x) const {
  return conv1d(x, tape.param(*w_), tape.param(*b_), stride_);
}

}  // namespace rul::nn
