#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "trajmix/tensor/parameters.hpp"
#include "trajmix/tensor/tensor.hpp"

namespace trajmix::tensor {

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  std::size_t size() const { return value().size(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode recording of one forward pass.
///
/// A tape is single-use: `backward` consumes the recorded closures. Gradients remain
/// readable afterwards and can be added into a ParameterStore. In inference mode no
/// closures are stored and `backward` is rejected.
class Tape {
 public:
  enum class Mode { kRecord, kInference };

  /// Propagates the gradient held by node `self` into its parents.
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  explicit Tape(Mode mode = Mode::kRecord) : mode_(mode) {}
  explicit Tape(const ParameterStore& store, Mode mode = Mode::kRecord)
      : mode_(mode), store_(&store) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return mode_ == Mode::kRecord; }

  Var constant(Tensor value);
  /// Leaf that receives a gradient.
  Var variable(Tensor value);
  /// Leaf bound to a parameter of the store this tape was created with. Repeated
  /// requests for the same name return the same node.
  Var parameter(const std::string& name);
  bool has_store() const { return store_ != nullptr; }
  const ParameterStore& store() const;

  /// Appends a node computed from `parents`. `fn` is dropped when no parent needs a gradient.
  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn);
  Var record(Tensor value, std::span<const Var> parents, BackwardFn fn);

  /// Seeds d(loss)/d(loss) = 1 and runs the recorded closures in reverse order.
  void backward(Var loss);

  const Tensor& value(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Gradient of node `id`; zeros when nothing flowed into it.
  const Tensor& grad(Var v) const;
  const Tensor& grad(std::size_t id) const;
  /// Accumulation buffer for a parent's gradient, allocated on first use.
  Tensor& grad_buffer(std::size_t id);

  /// Adds parameter gradients into `store`'s accumulators and marks them ready.
  void accumulate_into(ParameterStore& store, double scale = 1.0) const;

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var push(Node node);

  Mode mode_;
  const ParameterStore* store_ = nullptr;
  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::size_t> parameter_ids_;
  std::vector<std::pair<std::string, std::size_t>> parameter_order_;
  bool consumed_ = false;
};

}  // namespace trajmix::tensor
