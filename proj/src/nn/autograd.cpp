#include "rul/nn/autograd.hpp"

#include <stdexcept>

namespace rul::nn {

Parameter& ParameterSet::create(std::string name, Tensor init) {
  if (find(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  params_.push_back(std::make_unique<Parameter>(std::move(name), std::move(init)));
  return *params_.back();
}

std::vector<Parameter*> ParameterSet::all() const {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

Parameter* ParameterSet::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

Tensor& Node::grad_buffer() {
  if (grad.size() != value().size()) grad = Tensor(value().shape());
  return grad;
}

Var Tape::constant(Tensor value) { return record(std::move(value), false, {}); }

Var Tape::leaf(Tensor value) { return record(std::move(value), grad_enabled_, {}); }

Var Tape::param(Parameter& param) {
  auto node = std::make_unique<Node>();
  node->ref = &param.value;
  node->requires_grad = grad_enabled_;
  if (grad_enabled_) {
    Parameter* target = &param;
    node->backward = [target](Node& self) {
      if (self.grad.size() == target->grad.size()) target->grad.add_(self.grad);
    };
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.back().get());
}

Var Tape::record(Tensor value, bool requires_grad, std::function<void(Node&)> backward) {
  auto node = std::make_unique<Node>();
  node->owned = std::move(value);
  node->requires_grad = requires_grad && grad_enabled_;
  if (node->requires_grad) node->backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.back().get());
}

void Tape::backward(const Var& root) {
  if (root.value().size() != 1) {
    throw std::invalid_argument("backward root must hold a single element, got shape " +
                                shape_str(root.shape()));
  }
  if (!root.requires_grad()) return;
  root.node()->grad_buffer()[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = **it;
    if (n.requires_grad && n.backward && n.grad.size() == n.value().size()) n.backward(n);
  }
}

}  // namespace rul::nn
