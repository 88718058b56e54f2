#pragma once

#include <functional>
#include <string>
#include <vector>

#include "trajmix/tensor/parameters.hpp"
#include "trajmix/tensor/tape.hpp"

namespace trajmix::tensor {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "<name>[index]" of the worst entry
  std::size_t checked = 0;
};

/// Builds a scalar loss on the given tape from leaf variables holding `inputs`.
using InputLossFn = std::function<Var(Tape&, const std::vector<Var>&)>;
/// Builds a scalar loss on a tape bound to a parameter store.
using ParamLossFn = std::function<Var(Tape&)>;

/// Compares reverse-mode gradients with central differences of step `step`.
/// Error per entry is |analytic - numeric| / max(1, |numeric|); the maximum is returned.
/// `stride` > 1 checks every stride-th entry of each tensor.
GradCheckResult finite_difference_check(const InputLossFn& fn, std::vector<Tensor> inputs,
                                        double step = 1e-6, std::size_t stride = 1);
GradCheckResult finite_difference_check(const ParamLossFn& fn, ParameterStore& store,
                                        double step = 1e-6, std::size_t stride = 1);

}  // namespace trajmix::tensor
