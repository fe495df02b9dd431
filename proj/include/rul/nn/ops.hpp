#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "rul/nn/autograd.hpp"

namespace rul::nn {

using Rng = std::mt19937_64;

// Elementwise arithmetic. Binary ops require identical shapes.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);

// Activations.
Var sigmoid(const Var& x);
Var tanh(const Var& x);
Var relu(const Var& x);
Var leaky_relu(const Var& x, double slope);
Var silu(const Var& x);
Var exp(const Var& x);
/// max(x, floor) elementwise; gradient flows only where x > floor.
Var clamp_min(const Var& x, double floor);

/// x[..., n] * w[n, m] (+ b[m]) over the last axis.
Var linear(const Var& x, const Var& w, const Var& b);
Var linear(const Var& x, const Var& w);

/// Batched products for rank-3 inputs: a[B,m,k] * b[B,k,n] and a[B,m,k] * b[B,n,k]^T.
Var bmm(const Var& a, const Var& b);
Var bmm_nt(const Var& a, const Var& b);
/// Softmax over the last axis.
Var softmax(const Var& x);

Var reshape(const Var& x, Shape shape);
/// [B, m, n] -> [B, n, m].
Var transpose12(const Var& x);
/// Columns [start, start + len) of the last axis.
Var slice_last(const Var& x, std::size_t start, std::size_t len);
/// Concatenate along the last axis; leading dims must agree.
Var concat_last(const std::vector<Var>& parts);
/// Row t of the middle axis: [B, L, d] -> [B, d].
Var time_step(const Var& x, std::size_t t);
/// Inverse of time_step: L tensors [B, d] -> [B, L, d].
Var stack_steps(const std::vector<Var>& steps);
/// Every `step`-th element of the last axis starting at `start`.
Var take_stride_last(const Var& x, std::size_t start, std::size_t step);
/// Interleave even/odd sequences along the last axis: out[2i] = even[i], out[2i+1] = odd[i].
Var interleave_last(const Var& even, const Var& odd);
/// Replicate the edge values of the last axis.
Var pad_replicate_last(const Var& x, std::size_t left, std::size_t right);

/// Valid cross-correlation: x[B, Cin, L], w[Cout, Cin, K], b[Cout] -> [B, Cout, L'].
Var conv1d(const Var& x, const Var& w, const Var& b, std::size_t stride = 1);
Var maxpool1d(const Var& x, std::size_t kernel, std::size_t stride);

/// Inverted dropout. Identity when !training or p == 0.
Var dropout(const Var& x, double p, bool training, Rng& rng);

/// Rows of x[B, D] scaled to unit L2 norm; an all-zero row stays zero.
Var normalize_rows(const Var& x);
/// Per-row dot product and L2 norm: [B, D] -> [B, 1].
Var row_dot(const Var& a, const Var& b);
Var row_norm(const Var& x);

Var sum(const Var& x);
Var mean(const Var& x);

/// Output length of a valid window of size `kernel` moved by `stride`.
std::size_t window_out_len(std::size_t len, std::size_t kernel, std::size_t stride);

}  // namespace rul::nn
