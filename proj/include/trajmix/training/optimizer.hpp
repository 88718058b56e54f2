#pragma once

#include <vector>

#include "trajmix/tensor/parameters.hpp"

namespace trajmix::training {

struct AdamWConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.001;

  void validate() const;
};

/// Adam with decoupled weight decay and bias correction.
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {});

  const AdamWConfig& config() const { return cfg_; }
  long step_count() const { return steps_; }

  /// Applies one update from the accumulated gradients and clears them. Throws StateError
  /// when no gradients were accumulated since the last step.
  void step(tensor::ParameterStore& store);

 private:
  AdamWConfig cfg_;
  long steps_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

/// Free-function form of AdamW::step.
void adamw_step(tensor::ParameterStore& store, AdamW& optimizer);

}  // namespace trajmix::training
