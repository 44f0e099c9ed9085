#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ndtensor/tensor.hpp"

namespace divseg::nd {

class Tape;
class Var;
class Gradients;
Gradients backward(Tape& tape, Var loss);

// Handle to a node on a tape. Cheap to copy; valid until the tape is cleared.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const noexcept { return id_; }
  Tape& tape() const;
  bool valid() const noexcept { return tape_ != nullptr; }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// View handed to a backward rule while the tape is swept in reverse.
class BackwardContext {
 public:
  const Tensor& grad_output() const { return *grad_out_; }
  const Tensor& output() const;
  const Tensor& input(std::size_t k) const;
  std::size_t input_count() const;
  bool needs_grad(std::size_t k) const;
  // Accumulation buffer for input k, zero-filled on first use. Rules add into it.
  std::span<double> grad_input(std::size_t k);

 private:
  friend class Tape;
  friend Gradients backward(Tape& tape, Var loss);
  BackwardContext(Tape& tape, std::size_t node, const Tensor& grad_out)
      : tape_(&tape), node_(node), grad_out_(&grad_out) {}

  Tape* tape_;
  std::size_t node_;
  const Tensor* grad_out_;
};

using BackwardRule = std::function<void(BackwardContext&)>;

// Define-by-run record of operations. Single owner; rebuilt every forward pass.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Differentiable input (a parameter or anything we want the gradient of).
  Var leaf(Tensor value);
  // Non-differentiable input.
  Var constant(Tensor value);
  // Copy of `v` cut off from the graph.
  Var detach(Var v);

  // Appends an operation result. Rejects non-finite outputs with NumericError
  // naming `op`. The rule is dropped when no input requires a gradient.
  Var record(const char* op, Tensor value, std::vector<Var> inputs,
             BackwardRule rule);

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const {
    return nodes_.at(id).requires_grad;
  }
  const char* op_name(std::size_t id) const { return nodes_.at(id).op; }
  std::size_t size() const noexcept { return nodes_.size(); }
  void clear();

 private:
  friend class BackwardContext;
  friend Gradients backward(Tape& tape, Var loss);

  struct Node {
    const char* op = "leaf";
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardRule rule;
    bool requires_grad = false;
    bool is_leaf = false;
    std::optional<Tensor> grad;
  };

  // deque keeps references to earlier node values valid while recording.
  std::deque<Node> nodes_;
};

// Leaf gradients produced by one backward sweep, indexed by leaf node id.
class Gradients {
 public:
  // Gradient for a leaf. Leaves the loss does not reach get zeros.
  const Tensor& at(std::size_t leaf_id) const;
  const Tensor& at(Var leaf) const { return at(leaf.id()); }
  bool contains(std::size_t leaf_id) const;

 private:
  friend Gradients backward(Tape& tape, Var loss);
  std::vector<std::optional<Tensor>> grads_;
};

// Reverse sweep from a single-element loss. Clears the tape afterwards.
Gradients backward(Tape& tape, Var loss);

}  // namespace divseg::nd
