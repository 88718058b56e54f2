#include "trajmix/mpc/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "trajmix/core/errors.hpp"

namespace trajmix::mpc {

namespace {

void check_horizon(const std::vector<Control>& controls, const std::vector<VehicleState>& reference) {
  if (reference.size() != controls.size() + 1) {
    throw DimensionError("reference needs " + std::to_string(controls.size() + 1) +
                         " states, got " + std::to_string(reference.size()));
  }
}

// Residual x - ref with the yaw entry wrapped.
StateVec residual(const VehicleState& s, const VehicleState& ref) {
  StateVec e = to_vec(s) - to_vec(ref);
  e(2) = wrap_angle(s.pose.yaw - ref.pose.yaw);
  return e;
}

}  // namespace

void DynamicsParams::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("dt must be positive");
  if (!(wheelbase > 0.0) || !std::isfinite(wheelbase)) throw DomainError("wheelbase must be positive");
}

void MpcWeights::validate() const {
  for (double v : q) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("state weights must be >= 0");
  }
  for (double v : r) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("control weights must be >= 0");
  }
  if (!(jerk >= 0.0) || !std::isfinite(jerk)) throw DomainError("jerk weight must be >= 0");
}

void ControlBounds::validate() const {
  for (int i = 0; i < kControlDim; ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || lower[i] > upper[i]) {
      throw DomainError("control bounds need finite lower <= upper");
    }
  }
}

Control ControlBounds::clamp(const Control& u) const {
  Control out{};
  for (int i = 0; i < kControlDim; ++i) out[i] = std::clamp(u[i], lower[i], upper[i]);
  return out;
}

bool ControlBounds::contains(const Control& u) const {
  for (int i = 0; i < kControlDim; ++i) {
    if (!(u[i] >= lower[i] && u[i] <= upper[i])) return false;
  }
  return true;
}

StateVec to_vec(const VehicleState& s) {
  const auto a = s.to_array();
  return StateVec(a.data());
}

VehicleState dynamics_step(const VehicleState& s, const Control& u, const DynamicsParams& p) {
  const double dt = p.dt;
  VehicleState n;
  n.pose.x = s.pose.x + s.vx * std::cos(s.pose.yaw) * dt;
  n.pose.y = s.pose.y + s.vx * std::sin(s.pose.yaw) * dt;
  n.pose.yaw = wrap_angle(s.pose.yaw + s.yaw_rate * dt);
  n.vx = s.vx + s.ax * dt;
  n.vy = s.vy + s.ay * dt;
  n.yaw_rate = u[2];
  n.ax = u[0];
  n.ay = u[1];
  n.yaw_acc = (u[2] - s.yaw_rate) / dt;
  return n;
}

std::vector<VehicleState> rollout(const VehicleState& x0, const std::vector<Control>& controls,
                                  const DynamicsParams& p) {
  std::vector<VehicleState> states;
  states.reserve(controls.size() + 1);
  states.push_back(x0);
  for (const Control& u : controls) states.push_back(dynamics_step(states.back(), u, p));
  return states;
}

void dynamics_jacobians(const VehicleState& s, const DynamicsParams& p, StateMat& a, InputMat& b) {
  const double dt = p.dt;
  const double c = std::cos(s.pose.yaw);
  const double sn = std::sin(s.pose.yaw);
  a.setZero();
  a(0, 0) = 1.0;
  a(0, 2) = -s.vx * sn * dt;
  a(0, 3) = c * dt;
  a(1, 1) = 1.0;
  a(1, 2) = s.vx * c * dt;
  a(1, 3) = sn * dt;
  a(2, 2) = 1.0;
  a(2, 5) = dt;
  a(3, 3) = 1.0;
  a(3, 6) = dt;
  a(4, 4) = 1.0;
  a(4, 7) = dt;
  a(8, 5) = -1.0 / dt;
  b.setZero();
  b(5, 2) = 1.0;
  b(6, 0) = 1.0;
  b(7, 1) = 1.0;
  b(8, 2) = 1.0 / dt;
}

double trajectory_cost(const std::vector<Control>& controls, const std::vector<VehicleState>& states,
                       const std::vector<VehicleState>& reference, const MpcWeights& w) {
  check_horizon(controls, reference);
  if (states.size() != reference.size()) throw DimensionError("state and reference lengths differ");
  double cost = 0.0;
  for (std::size_t t = 0; t < controls.size(); ++t) {
    const StateVec e = residual(states[t + 1], reference[t + 1]);
    for (int i = 0; i < kStateDim; ++i) cost += w.q[i] * e(i) * e(i);
    const Control& u = controls[t];
    for (int i = 0; i < kControlDim; ++i) cost += w.r[i] * u[i] * u[i];
    if (t + 1 < controls.size()) {
      const double jx = states[t + 2].ax - states[t + 1].ax;
      const double jy = states[t + 2].ay - states[t + 1].ay;
      cost += w.jerk * (jx * jx + jy * jy);
    }
  }
  return cost;
}

double mpc_cost(const std::vector<Control>& controls, const VehicleState& x0,
                const std::vector<VehicleState>& reference, const MpcWeights& w,
                const DynamicsParams& p) {
  check_horizon(controls, reference);
  return trajectory_cost(controls, rollout(x0, controls, p), reference, w);
}

std::vector<Control> mpc_cost_gradient(const std::vector<Control>& controls, const VehicleState& x0,
                                       const std::vector<VehicleState>& reference,
                                       const MpcWeights& w, const DynamicsParams& p) {
  check_horizon(controls, reference);
  const auto states = rollout(x0, controls, p);
  const std::size_t horizon = controls.size();
  std::vector<Control> grad(horizon);
  StateVec lambda = StateVec::Zero();  // dJ/dx_{t+1} accumulated from the future
  StateMat a;
  InputMat b;
  for (std::size_t k = horizon; k-- > 0;) {
    // Direct terms on x_{k+1}: tracking and the jerk pair (a_{k+2} - a_{k+1}).
    const StateVec e = residual(states[k + 1], reference[k + 1]);
    for (int i = 0; i < kStateDim; ++i) lambda(i) += 2.0 * w.q[i] * e(i);
    if (k + 1 < horizon) {
      lambda(6) -= 2.0 * w.jerk * (states[k + 2].ax - states[k + 1].ax);
      lambda(7) -= 2.0 * w.jerk * (states[k + 2].ay - states[k + 1].ay);
    }
    if (k >= 1) {
      lambda(6) += 2.0 * w.jerk * (states[k + 1].ax - states[k].ax);
      lambda(7) += 2.0 * w.jerk * (states[k + 1].ay - states[k].ay);
    }
    dynamics_jacobians(states[k], p, a, b);
    const ControlVec gu = b.transpose() * lambda;
    for (int i = 0; i < kControlDim; ++i) grad[k][i] = gu(i) + 2.0 * w.r[i] * controls[k][i];
    lambda = a.transpose() * lambda;
  }
  return grad;
}

std::vector<VehicleState> build_reference(const Trajectory& ref, const VehicleState& x0,
                                          double dt) {
  ref.validate();
  if (!(dt > 0.0)) throw DomainError("dt must be positive");
  const double span = static_cast<double>(ref.size()) * ref.dt;
  const auto steps = static_cast<std::size_t>(std::llround(span / dt));
  if (steps == 0) throw DomainError("reference shorter than one smoother step");

  // Knots at times 0, ref.dt, 2 ref.dt, ...; yaw unwrapped along the shorter arc.
  std::vector<double> kx{x0.pose.x}, ky{x0.pose.y}, kyaw{x0.pose.yaw};
  for (const Pose2D& q : ref.points) {
    kx.push_back(q.x);
    ky.push_back(q.y);
    kyaw.push_back(kyaw.back() + wrap_angle(q.yaw - kyaw.back()));
  }
  std::vector<double> px(steps + 1), py(steps + 1), pyaw(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    const double tau = std::min(static_cast<double>(k) * dt / ref.dt, static_cast<double>(ref.size()));
    auto seg = static_cast<std::size_t>(std::floor(tau));
    if (seg >= ref.size()) seg = ref.size() - 1;
    const double f = tau - static_cast<double>(seg);
    px[k] = kx[seg] + f * (kx[seg + 1] - kx[seg]);
    py[k] = ky[seg] + f * (ky[seg + 1] - ky[seg]);
    pyaw[k] = kyaw[seg] + f * (kyaw[seg + 1] - kyaw[seg]);
  }
  px[0] = x0.pose.x;
  py[0] = x0.pose.y;
  pyaw[0] = x0.pose.yaw;

  std::vector<VehicleState> out(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) out[k].pose = Pose2D(px[k], py[k], pyaw[k]);
  // Forward differences mirror the update structure: p_{k+1} = p_k + vx_k dir(yaw_k) dt.
  for (std::size_t k = 0; k < steps; ++k) {
    const double dx = px[k + 1] - px[k];
    const double dy = py[k + 1] - py[k];
    const double c = std::cos(pyaw[k]);
    const double s = std::sin(pyaw[k]);
    out[k].vx = (dx * c + dy * s) / dt;
    out[k].vy = (-dx * s + dy * c) / dt;
    out[k].yaw_rate = (pyaw[k + 1] - pyaw[k]) / dt;
  }
  out[steps].vx = out[steps - 1].vx;
  out[steps].vy = out[steps - 1].vy;
  out[steps].yaw_rate = out[steps - 1].yaw_rate;
  for (std::size_t k = 0; k < steps; ++k) {
    out[k].ax = (out[k + 1].vx - out[k].vx) / dt;
    out[k].ay = (out[k + 1].vy - out[k].vy) / dt;
  }
  out[steps].ax = out[steps - 1].ax;
  out[steps].ay = out[steps - 1].ay;
  out[0].yaw_acc = x0.yaw_acc;
  for (std::size_t k = 1; k <= steps; ++k) {
    const double prev = k == 1 ? x0.yaw_rate : out[k - 1].yaw_rate;
    out[k].yaw_acc = (out[k].yaw_rate - prev) / dt;
  }
  return out;
}

BicycleLinearization linearize_bicycle(const Pose2D& state, double v, double steer,
                                       double wheelbase, double step) {
  const double cd = std::cos(steer);
  if (std::abs(cd) < 1e-12) throw DomainError("singular steering angle");
  if (!(wheelbase > 0.0)) throw DomainError("wheelbase must be positive");
  BicycleLinearization lin;
  const double c = std::cos(state.yaw);
  const double s = std::sin(state.yaw);
  lin.a << 0.0, 0.0, -v * s,
           0.0, 0.0, v * c,
           0.0, 0.0, 0.0;
  lin.b << c, 0.0,
           s, 0.0,
           std::tan(steer) / wheelbase, v / (wheelbase * cd * cd);
  lin.a_discrete = Eigen::Matrix3d::Identity() + step * lin.a;
  lin.b_discrete = step * lin.b;
  return lin;
}

}  // namespace trajmix::mpc
