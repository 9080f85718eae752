#include "protocacl/numerics/tape.hpp"

#include "protocacl/errors.hpp"

namespace protocacl::num {

NumArray Gradients::of(Var v) const {
  if (const auto* g = find(v)) return *g;
  return NumArray(v.shape(), 0.0);
}

Var Tape::leaf(NumArray value, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::borrow(const NumArray& value, bool requires_grad) {
  Node node;
  node.external = &value;
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(NumArray value, std::vector<std::size_t> inputs, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  for (auto id : inputs) {
    if (id >= nodes_.size()) throw ContractError("record: input id not on this tape");
    node.requires_grad = node.requires_grad || nodes_[id].requires_grad;
  }
  node.inputs = std::move(inputs);
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Gradients Tape::backward(Var loss) const {
  if (&loss.tape() != this) throw ContractError("backward: loss recorded on a different tape");
  const auto& lv = value(loss.id());
  if (lv.size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " + shape_string(lv.shape()));
  }
  Gradients grads(nodes_.size());
  grads.slot(loss.id()) = NumArray(lv.shape(), 1.0);

  std::vector<NumArray*> grad_in;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    const auto& node = nodes_[id];
    auto& g = grads.slot(id);
    if (!g || !node.backward) continue;
    grad_in.assign(node.inputs.size(), nullptr);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      const auto in = node.inputs[k];
      if (!nodes_[in].requires_grad) continue;
      auto& slot = grads.slot(in);
      if (!slot) slot.emplace(value(in).shape(), 0.0);
      grad_in[k] = &*slot;
    }
    node.backward(*this, *g, grad_in);
  }
  return grads;
}

}  // namespace protocacl::num
