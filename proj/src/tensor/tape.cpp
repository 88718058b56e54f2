#include "trajmix/tensor/tape.hpp"

#include "trajmix/core/errors.hpp"

namespace trajmix::tensor {

const Tensor& Var::value() const {
  if (!tape_) throw StateError("use of an unbound Var");
  return tape_->value(id_);
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::variable(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = recording();
  return push(std::move(n));
}

const ParameterStore& Tape::store() const {
  if (!store_) throw StateError("tape is not bound to a parameter store");
  return *store_;
}

Var Tape::parameter(const std::string& name) {
  if (auto it = parameter_ids_.find(name); it != parameter_ids_.end()) {
    return Var(this, it->second);
  }
  Node n;
  n.external = &store().value(name);
  n.requires_grad = recording();
  Var v = push(std::move(n));
  parameter_ids_.emplace(name, v.id());
  parameter_order_.emplace_back(name, v.id());
  return v;
}

Var Tape::record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn) {
  return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                std::move(fn));
}

Var Tape::record(Tensor value, std::span<const Var> parents, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  if (recording()) {
    for (const Var& p : parents) {
      if (&p.tape() != this) throw StateError("operands recorded on different tapes");
      if (nodes_[p.id()].requires_grad) n.requires_grad = true;
    }
    if (n.requires_grad) n.backward = std::move(fn);
  }
  return push(std::move(n));
}

const Tensor& Tape::value(std::size_t id) const {
  const Node& n = nodes_.at(id);
  return n.external ? *n.external : n.value;
}

const Tensor& Tape::grad(Var v) const { return grad(v.id()); }

const Tensor& Tape::grad(std::size_t id) const {
  const Node& n = nodes_.at(id);
  if (!n.has_grad) {
    // Materialize zeros lazily so callers can always read a gradient.
    auto& mutable_node = const_cast<Node&>(n);
    mutable_node.grad = Tensor(value(id).shape(), 0.0);
    mutable_node.has_grad = true;
  }
  return n.grad;
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor(value(id).shape(), 0.0);
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::backward(Var loss) {
  if (!recording()) throw StateError("backward called on an inference tape");
  if (consumed_) throw StateError("backward already ran on this tape");
  if (!loss.valid() || &loss.tape() != this) {
    throw StateError("backward requires a loss recorded on this tape");
  }
  if (loss.size() != 1) {
    throw DimensionError("backward requires a scalar loss, got shape " +
                         shape_string(loss.shape()));
  }
  grad_buffer(loss.id())[0] += 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && n.has_grad) n.backward(*this, i);
  }
  for (auto& n : nodes_) n.backward = nullptr;
  consumed_ = true;
}

void Tape::accumulate_into(ParameterStore& store, double scale) const {
  if (!consumed_) throw StateError("accumulate_into requires a completed backward pass");
  for (const auto& [name, id] : parameter_order_) {
    const Node& n = nodes_[id];
    if (!n.has_grad) continue;
    Tensor& g = store.grad(name);
    if (g.shape() != n.grad.shape()) throw DimensionError("gradient shape mismatch for " + name);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += scale * n.grad[k];
  }
  store.mark_gradients_ready();
}

}  // namespace trajmix::tensor
