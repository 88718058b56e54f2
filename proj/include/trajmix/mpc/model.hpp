#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "trajmix/core/geometry.hpp"

namespace trajmix::mpc {

inline constexpr int kStateDim = 9;
inline constexpr int kControlDim = 3;

/// Control input [a_x, a_y, yaw_rate].
using Control = std::array<double, kControlDim>;
using StateVec = Eigen::Matrix<double, kStateDim, 1>;
using ControlVec = Eigen::Matrix<double, kControlDim, 1>;
using StateMat = Eigen::Matrix<double, kStateDim, kStateDim>;
using InputMat = Eigen::Matrix<double, kStateDim, kControlDim>;

struct DynamicsParams {
  double dt = 0.1;
  double wheelbase = 3.089;

  void validate() const;
};

/// Diagonal weights. State order: x, y, yaw, vx, vy, yaw_rate, ax, ay, yaw_acc.
struct MpcWeights {
  std::array<double, kStateDim> q{1.0, 1.0, 1.0, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1};
  std::array<double, kControlDim> r{0.01, 0.01, 0.001};
  double jerk = 0.01;  // on successive (a_x, a_y) differences inside the horizon

  void validate() const;
};

struct ControlBounds {
  Control lower{-5.0, -5.0, -1.0};
  Control upper{5.0, 5.0, 1.0};

  void validate() const;
  Control clamp(const Control& u) const;
  bool contains(const Control& u) const;
};

/// One step of the nine-state model; yaw re-wrapped.
VehicleState dynamics_step(const VehicleState& s, const Control& u, const DynamicsParams& p);

/// States x_0 .. x_T with x_0 = x0.
std::vector<VehicleState> rollout(const VehicleState& x0, const std::vector<Control>& controls,
                                  const DynamicsParams& p);

/// Jacobians of dynamics_step with respect to state and control.
void dynamics_jacobians(const VehicleState& s, const DynamicsParams& p, StateMat& a, InputMat& b);

/// Tracking + effort + in-horizon jerk cost of single-shooting controls.
/// `reference` holds T + 1 states; entry 0 is ignored.
double mpc_cost(const std::vector<Control>& controls, const VehicleState& x0,
                const std::vector<VehicleState>& reference, const MpcWeights& w,
                const DynamicsParams& p);

/// Cost of an already rolled-out state sequence.
double trajectory_cost(const std::vector<Control>& controls, const std::vector<VehicleState>& states,
                       const std::vector<VehicleState>& reference, const MpcWeights& w);

/// Exact gradient of mpc_cost with respect to the controls (adjoint recursion).
std::vector<Control> mpc_cost_gradient(const std::vector<Control>& controls, const VehicleState& x0,
                                       const std::vector<VehicleState>& reference,
                                       const MpcWeights& w, const DynamicsParams& p);

/// Reference states on the smoother grid from a pose trajectory sampled every ref.dt after
/// x0. Poses are linearly interpolated (yaw along the shorter arc); rates come from forward
/// differences matching the model's update structure. Returns T + 1 states, entry 0 = x0.
std::vector<VehicleState> build_reference(const Trajectory& ref, const VehicleState& x0,
                                          double dt);

/// Kinematic bicycle linearization with state (x, y, yaw) and control (v, steer).
struct BicycleLinearization {
  Eigen::Matrix3d a;
  Eigen::Matrix<double, 3, 2> b;
  Eigen::Matrix3d a_discrete;
  Eigen::Matrix<double, 3, 2> b_discrete;
};

/// Throws DomainError when cos(steer) vanishes.
BicycleLinearization linearize_bicycle(const Pose2D& state, double v, double steer,
                                       double wheelbase, double step);

StateVec to_vec(const VehicleState& s);

}  // namespace trajmix::mpc
