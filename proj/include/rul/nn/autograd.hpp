#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rul/nn/tensor.hpp"

namespace rul::nn {

/// A trainable array with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}
  void zero_grad() { grad.fill(0.0); }
};

/// Owns parameters with stable addresses; layers keep raw pointers into it.
class ParameterSet {
 public:
  Parameter& create(std::string name, Tensor init);
  std::vector<Parameter*> all() const;
  Parameter* find(const std::string& name) const;
  std::size_t count() const { return params_.size(); }
  std::size_t scalar_count() const;
  void zero_grad();

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

class Tape;

/// One recorded value. Gradients are allocated on first accumulation.
struct Node {
  Tensor owned;
  const Tensor* ref = nullptr;
  Tensor grad;
  bool requires_grad = false;
  std::function<void(Node&)> backward;

  const Tensor& value() const { return ref ? *ref : owned; }
  /// Gradient buffer, zero-initialized on first use.
  Tensor& grad_buffer();
};

/// Handle to a node on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, Node* node) : tape_(tape), node_(node) {}

  const Tensor& value() const { return node_->value(); }
  const Shape& shape() const { return node_->value().shape(); }
  std::size_t dim(std::size_t axis) const { return shape().at(axis); }
  bool requires_grad() const { return node_->requires_grad; }
  const Tensor& grad() const { return node_->grad; }

  Tape& tape() const { return *tape_; }
  Node* node() const { return node_; }
  explicit operator bool() const { return node_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  Node* node_ = nullptr;
};

/// Reverse-mode recording. Nodes are appended in evaluation order, so the
/// reverse of that order is a valid topological order for backward.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Differentiable leaf whose gradient stays on the node.
  Var leaf(Tensor value);
  /// Leaf bound to a parameter; backward accumulates into `param.grad`.
  Var param(Parameter& param);

  /// Records an op result. `backward` may be empty when no input needs a gradient.
  Var record(Tensor value, bool requires_grad, std::function<void(Node&)> backward);

  /// Seeds d(root)/d(root) = 1 for a single-element root and runs all closures.
  void backward(const Var& root);

  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

  /// When false, ops record values only and never require gradients.
  bool grad_enabled() const { return grad_enabled_; }
  void set_grad_enabled(bool on) { grad_enabled_ = on; }

 private:
  std::vector<std::unique_ptr<Node>> nodes_;
  bool grad_enabled_ = true;
};

}  // namespace rul::nn
