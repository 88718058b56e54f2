#pragma once

#include <cstddef>
#include <vector>

#include "trajmix/mpc/model.hpp"

namespace trajmix::mpc {

struct SmootherOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-6;  // on the projected gradient norm

  void validate() const;
};

struct SmoothResult {
  Trajectory trajectory;  // poses x_1 .. x_T of the rollout, spaced by the model dt
  std::vector<Control> controls;
  std::vector<VehicleState> states;  // full rollout, states[0] = x0
  double cost = 0.0;
  double initial_cost = 0.0;
  double gradient_norm = 0.0;  // projected
  bool converged = false;
  int iterations = 0;
};

/// Box-constrained Gauss-Newton iLQR over single-shooting controls, starting from zero
/// controls clamped into the box. Only cost-decreasing steps are accepted, so
/// cost <= initial_cost always holds. Never throws on non-convergence.
SmoothResult smooth_states(const std::vector<VehicleState>& reference, const VehicleState& x0,
                           const MpcWeights& weights, const ControlBounds& bounds,
                           const DynamicsParams& params, const SmootherOptions& options = {});

/// Interpolates `ref` onto the model grid (build_reference) and smooths it.
SmoothResult smooth(const Trajectory& ref, const VehicleState& x0, const MpcWeights& weights,
                    const ControlBounds& bounds, const DynamicsParams& params,
                    const SmootherOptions& options = {});

/// Poses of `fine` at times (i + 1) * dt for i < count, linearly interpolated from the
/// start pose when the grids do not align.
Trajectory resample(const Trajectory& fine, const Pose2D& start, double dt, std::size_t count);

/// Norm of the gradient with components pushed against an active bound removed.
double projected_gradient_norm(const std::vector<Control>& controls,
                               const std::vector<Control>& gradient, const ControlBounds& bounds);

}  // namespace trajmix::mpc
