#include "ndtensor/tape.hpp"

#include <string>

#include "common/error.hpp"

namespace divseg::nd {

const Tensor& Var::value() const { return tape().value(id_); }

Tape& Var::tape() const {
  if (!tape_) throw ContractError("var: handle is not bound to a tape");
  return *tape_;
}

bool Var::requires_grad() const { return tape().requires_grad(id_); }

const Tensor& BackwardContext::output() const {
  return tape_->nodes_[node_].value;
}

const Tensor& BackwardContext::input(std::size_t k) const {
  return tape_->nodes_[tape_->nodes_[node_].inputs.at(k)].value;
}

std::size_t BackwardContext::input_count() const {
  return tape_->nodes_[node_].inputs.size();
}

bool BackwardContext::needs_grad(std::size_t k) const {
  return tape_->nodes_[tape_->nodes_[node_].inputs.at(k)].requires_grad;
}

std::span<double> BackwardContext::grad_input(std::size_t k) {
  auto& in = tape_->nodes_[tape_->nodes_[node_].inputs.at(k)];
  if (!in.requires_grad) return {};
  if (!in.grad) in.grad.emplace(in.value.shape(), 0.0);
  return in.grad->data();
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  n.is_leaf = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.op = "constant";
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::detach(Var v) { return constant(v.value()); }

Var Tape::record(const char* op, Tensor value, std::vector<Var> inputs,
                 BackwardRule rule) {
  if (!value.all_finite()) {
    throw NumericError(std::string(op) + ": non-finite output");
  }
  Node n;
  n.op = op;
  n.value = std::move(value);
  n.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    if (&in.tape() != this || in.id() >= nodes_.size()) {
      throw ContractError(std::string(op) + ": input from a different tape");
    }
    n.inputs.push_back(in.id());
    n.requires_grad = n.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (n.requires_grad) n.rule = std::move(rule);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Tape::clear() { nodes_.clear(); }

const Tensor& Gradients::at(std::size_t leaf_id) const {
  if (!contains(leaf_id)) {
    throw ContractError("gradients: node " + std::to_string(leaf_id) +
                        " is not a leaf of the swept tape");
  }
  return *grads_[leaf_id];
}

bool Gradients::contains(std::size_t leaf_id) const {
  return leaf_id < grads_.size() && grads_[leaf_id].has_value();
}

Gradients backward(Tape& tape, Var loss) {
  if (&loss.tape() != &tape) {
    throw ContractError("backward: loss belongs to a different tape");
  }
  auto& nodes = tape.nodes_;
  const std::size_t root = loss.id();
  if (nodes.at(root).value.numel() != 1) {
    throw ContractError("backward: loss must be a scalar, got shape " +
                        to_string(nodes[root].value.shape()));
  }
  for (auto& n : nodes) n.grad.reset();

  if (nodes[root].requires_grad) {
    nodes[root].grad.emplace(nodes[root].value.shape(), 1.0);
  }
  for (std::size_t i = root + 1; i-- > 0;) {
    Tape::Node& n = nodes[i];
    if (!n.grad || !n.rule) continue;
    BackwardContext ctx(tape, i, *n.grad);
    n.rule(ctx);
    if (!n.is_leaf) n.grad.reset();
  }

  Gradients out;
  out.grads_.resize(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!nodes[i].is_leaf) continue;
    out.grads_[i] = nodes[i].grad ? std::move(*nodes[i].grad)
                                  : Tensor(nodes[i].value.shape(), 0.0);
  }
  tape.clear();
  return out;
}

}  // namespace divseg::nd
