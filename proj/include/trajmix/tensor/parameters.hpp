#pragma once

#include <deque>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "trajmix/core/rng.hpp"
#include "trajmix/tensor/tensor.hpp"

namespace trajmix::tensor {

/// Named learnable tensors with matching gradient accumulators.
///
/// Entries keep stable addresses for the lifetime of the store, so tapes may refer
/// to parameter values without copying them.
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    Tensor grad;
  };

  ParameterStore() = default;
  ParameterStore(const ParameterStore& other);
  ParameterStore& operator=(const ParameterStore& other);
  ParameterStore(ParameterStore&&) noexcept = default;
  ParameterStore& operator=(ParameterStore&&) noexcept = default;

  /// Registers a new parameter; throws StateError on duplicate names.
  Tensor& add(std::string name, Tensor init);
  /// Uniform in +-1/sqrt(fan_in).
  Tensor& add_uniform(std::string name, Shape shape, std::size_t fan_in, Rng& rng);
  Tensor& add_constant(std::string name, Shape shape, double value);

  bool contains(std::string_view name) const;
  const Tensor& value(std::string_view name) const;
  Tensor& value(std::string_view name);
  const Tensor& grad(std::string_view name) const;
  Tensor& grad(std::string_view name);

  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;
  const std::deque<Entry>& entries() const { return entries_; }
  std::deque<Entry>& entries() { return entries_; }

  void zero_grad();
  void fill_values(double v);
  bool gradients_ready() const { return gradients_ready_; }
  void mark_gradients_ready() { gradients_ready_ = true; }

  /// Replaces values from `other`, which must hold exactly the same names and shapes.
  void assign_values(const ParameterStore& other);

  /// Text checkpoint; see docs/checkpoint_format.md.
  void save(std::ostream& os) const;
  static ParameterStore load(std::istream& is);
  void save_file(const std::string& path) const;
  static ParameterStore load_file(const std::string& path);

 private:
  Entry& find(std::string_view name);
  const Entry& find(std::string_view name) const;
  void rebuild_index();

  std::deque<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  bool gradients_ready_ = false;
};

}  // namespace trajmix::tensor
