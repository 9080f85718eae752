#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "protocacl/numerics/array.hpp"

namespace protocacl::num {

class Tape;

// Handle to a value recorded on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  const NumArray& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Local gradient rule. `grad_out` is dL/d(output); entries of `grad_in` are
// accumulators for dL/d(input_k), or null when input k does not need a gradient.
using BackwardFn =
    std::function<void(const Tape& tape, const NumArray& grad_out, std::span<NumArray* const> grad_in)>;

// Reverse-mode gradients indexed by node id.
class Gradients {
 public:
  explicit Gradients(std::size_t nodes) : grads_(nodes) {}

  const NumArray* find(std::size_t id) const { return grads_[id] ? &*grads_[id] : nullptr; }
  const NumArray* find(Var v) const { return find(v.id()); }
  // Gradient for v, or zeros of v's shape when the loss does not depend on it.
  NumArray of(Var v) const;

  std::optional<NumArray>& slot(std::size_t id) { return grads_[id]; }

 private:
  std::vector<std::optional<NumArray>> grads_;
};

// Define-by-run recording of operations in topological order.
// Single-threaded; one tape per episode.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Trainable or constant input owned by the tape.
  Var leaf(NumArray value, bool requires_grad = true);
  Var constant(NumArray value) { return leaf(std::move(value), false); }
  // Input that references caller-owned storage; `value` must outlive the tape.
  Var borrow(const NumArray& value, bool requires_grad = true);

  // Records an operation output. Inputs must already be on this tape.
  Var record(NumArray value, std::vector<std::size_t> inputs, BackwardFn backward);

  const NumArray& value(std::size_t id) const {
    const auto& n = nodes_[id];
    return n.external ? *n.external : n.value;
  }
  const NumArray& value(Var v) const { return value(v.id()); }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Reverse accumulation from a size-1 loss. Each node is visited once.
  Gradients backward(Var loss) const;

 private:
  struct Node {
    NumArray value;
    const NumArray* external = nullptr;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

inline const NumArray& Var::value() const { return tape_->value(id_); }
inline bool Var::requires_grad() const { return tape_->requires_grad(id_); }

}  // namespace protocacl::num
