#include "trajmix/mpc/smoother.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "trajmix/core/errors.hpp"

namespace trajmix::mpc {

namespace {

using ControlMat = Eigen::Matrix<double, kControlDim, kControlDim>;
using GainMat = Eigen::Matrix<double, kControlDim, kStateDim>;

constexpr double kMuMin = 1e-9;
constexpr double kMuMax = 1e10;

struct BoxStep {
  ControlVec step = ControlVec::Zero();
  std::array<bool, kControlDim> free{};
  bool ok = false;
};

// Minimizes 0.5 d'Hd + g'd over lo <= d <= hi by enumerating active sets.
BoxStep solve_box_qp(const ControlMat& h, const ControlVec& g, const ControlVec& lo,
                     const ControlVec& hi) {
  BoxStep best;
  double best_value = std::numeric_limits<double>::infinity();
  for (int code = 0; code < 27; ++code) {
    std::array<int, kControlDim> mode{};  // 0 free, 1 lower, 2 upper
    int c = code;
    bool skip = false;
    for (int i = 0; i < kControlDim; ++i) {
      mode[i] = c % 3;
      c /= 3;
      if (mode[i] == 0 && hi(i) - lo(i) <= 0.0) skip = true;
    }
    if (skip) continue;
    ControlVec d = ControlVec::Zero();
    std::array<int, kControlDim> idx{};
    int nf = 0;
    for (int i = 0; i < kControlDim; ++i) {
      if (mode[i] == 1) d(i) = lo(i);
      if (mode[i] == 2) d(i) = hi(i);
      if (mode[i] == 0) idx[nf++] = i;
    }
    if (nf > 0) {
      Eigen::MatrixXd hf(nf, nf);
      Eigen::VectorXd rhs(nf);
      for (int a = 0; a < nf; ++a) {
        rhs(a) = -g(idx[a]);
        for (int j = 0; j < kControlDim; ++j) {
          if (mode[j] != 0) rhs(a) -= h(idx[a], j) * d(j);
        }
        for (int b = 0; b < nf; ++b) hf(a, b) = h(idx[a], idx[b]);
      }
      Eigen::LLT<Eigen::MatrixXd> llt(hf);
      if (llt.info() != Eigen::Success) continue;
      const Eigen::VectorXd sol = llt.solve(rhs);
      bool feasible = true;
      for (int a = 0; a < nf; ++a) {
        const int i = idx[a];
        if (!std::isfinite(sol(a)) || sol(a) < lo(i) - 1e-12 || sol(a) > hi(i) + 1e-12) {
          feasible = false;
        }
        d(i) = std::clamp(sol(a), lo(i), hi(i));
      }
      if (!feasible) continue;
    }
    const double value = 0.5 * d.dot(h * d) + g.dot(d);
    if (value < best_value) {
      best_value = value;
      best.step = d;
      for (int i = 0; i < kControlDim; ++i) best.free[i] = mode[i] == 0;
      best.ok = true;
    }
  }
  return best;
}

struct Backward {
  std::vector<ControlVec> k;
  std::vector<GainMat> gain;
  bool ok = true;
};

Backward backward_pass(const std::vector<VehicleState>& states, const std::vector<Control>& controls,
                       const std::vector<VehicleState>& reference, const MpcWeights& w,
                       const ControlBounds& bounds, const DynamicsParams& p, double mu) {
  const std::size_t horizon = controls.size();
  Backward out;
  out.k.assign(horizon, ControlVec::Zero());
  out.gain.assign(horizon, GainMat::Zero());

  StateMat q_diag = StateMat::Zero();
  for (int i = 0; i < kStateDim; ++i) q_diag(i, i) = 2.0 * w.q[i];

  auto tracking_grad = [&](std::size_t j) {
    StateVec e = to_vec(states[j]) - to_vec(reference[j]);
    e(2) = wrap_angle(states[j].pose.yaw - reference[j].pose.yaw);
    return StateVec(q_diag * e);
  };

  StateVec vx = tracking_grad(horizon);
  StateMat vxx = q_diag;
  StateMat a;
  InputMat b;
  for (std::size_t k = horizon; k-- > 0;) {
    const VehicleState& s = states[k];
    ControlVec u(controls[k].data());
    dynamics_jacobians(s, p, a, b);

    StateVec lx = StateVec::Zero();
    StateMat lxx = StateMat::Zero();
    ControlVec lu = ControlVec::Zero();
    ControlMat luu = ControlMat::Zero();
    GainMat lux = GainMat::Zero();
    for (int i = 0; i < kControlDim; ++i) {
      lu(i) = 2.0 * w.r[i] * u(i);
      luu(i, i) = 2.0 * w.r[i];
    }
    if (k >= 1) {
      lx = tracking_grad(k);
      lxx = q_diag;
      const double jx = u(0) - s.ax;
      const double jy = u(1) - s.ay;
      lu(0) += 2.0 * w.jerk * jx;
      lu(1) += 2.0 * w.jerk * jy;
      luu(0, 0) += 2.0 * w.jerk;
      luu(1, 1) += 2.0 * w.jerk;
      lx(6) -= 2.0 * w.jerk * jx;
      lx(7) -= 2.0 * w.jerk * jy;
      lxx(6, 6) += 2.0 * w.jerk;
      lxx(7, 7) += 2.0 * w.jerk;
      lux(0, 6) -= 2.0 * w.jerk;
      lux(1, 7) -= 2.0 * w.jerk;
    }

    const StateVec qx = lx + a.transpose() * vx;
    const ControlVec qu = lu + b.transpose() * vx;
    const StateMat qxx = lxx + a.transpose() * vxx * a;
    ControlMat quu = luu + b.transpose() * vxx * b;
    quu = 0.5 * (quu + quu.transpose()) + mu * ControlMat::Identity();
    const GainMat qux = lux + b.transpose() * vxx * a;

    ControlVec lo, hi;
    for (int i = 0; i < kControlDim; ++i) {
      lo(i) = bounds.lower[i] - u(i);
      hi(i) = bounds.upper[i] - u(i);
    }
    const BoxStep qp = solve_box_qp(quu, qu, lo, hi);
    if (!qp.ok) {
      out.ok = false;
      return out;
    }
    out.k[k] = qp.step;

    std::array<int, kControlDim> idx{};
    int nf = 0;
    for (int i = 0; i < kControlDim; ++i) {
      if (qp.free[i]) idx[nf++] = i;
    }
    GainMat gain = GainMat::Zero();
    if (nf > 0) {
      Eigen::MatrixXd hf(nf, nf);
      Eigen::MatrixXd rhs(nf, kStateDim);
      for (int r = 0; r < nf; ++r) {
        for (int c = 0; c < nf; ++c) hf(r, c) = quu(idx[r], idx[c]);
        rhs.row(r) = -qux.row(idx[r]);
      }
      const Eigen::MatrixXd sol = hf.llt().solve(rhs);
      for (int r = 0; r < nf; ++r) gain.row(idx[r]) = sol.row(r);
    }
    out.gain[k] = gain;

    const ControlVec kk = qp.step;
    vx = qx + gain.transpose() * quu * kk + gain.transpose() * qu + qux.transpose() * kk;
    vxx = qxx + gain.transpose() * quu * gain + gain.transpose() * qux + qux.transpose() * gain;
    vxx = 0.5 * (vxx + vxx.transpose());
  }
  return out;
}

StateVec state_delta(const VehicleState& a, const VehicleState& b) {
  StateVec d = to_vec(a) - to_vec(b);
  d(2) = wrap_angle(a.pose.yaw - b.pose.yaw);
  return d;
}

Trajectory poses_of(const std::vector<VehicleState>& states, double dt) {
  Trajectory tr;
  tr.dt = dt;
  tr.points.reserve(states.size() - 1);
  for (std::size_t t = 1; t < states.size(); ++t) tr.points.push_back(states[t].pose);
  return tr;
}

}  // namespace

void SmootherOptions::validate() const {
  if (max_iterations < 0) throw DomainError("max_iterations must be >= 0");
  if (!(gradient_tolerance > 0.0)) throw DomainError("gradient_tolerance must be positive");
}

double projected_gradient_norm(const std::vector<Control>& controls,
                               const std::vector<Control>& gradient, const ControlBounds& bounds) {
  if (controls.size() != gradient.size()) throw DimensionError("gradient length mismatch");
  double sq = 0.0;
  for (std::size_t t = 0; t < controls.size(); ++t) {
    for (int i = 0; i < kControlDim; ++i) {
      const double g = gradient[t][i];
      const bool at_lower = controls[t][i] <= bounds.lower[i];
      const bool at_upper = controls[t][i] >= bounds.upper[i];
      if ((at_lower && g > 0.0) || (at_upper && g < 0.0)) continue;
      sq += g * g;
    }
  }
  return std::sqrt(sq);
}

SmoothResult smooth_states(const std::vector<VehicleState>& reference, const VehicleState& x0,
                           const MpcWeights& weights, const ControlBounds& bounds,
                           const DynamicsParams& params, const SmootherOptions& options) {
  weights.validate();
  bounds.validate();
  params.validate();
  options.validate();
  if (reference.size() < 2) throw DimensionError("reference needs at least two states");
  if (!x0.finite()) throw DomainError("initial state must be finite");
  const std::size_t horizon = reference.size() - 1;

  std::vector<Control> controls(horizon, bounds.clamp(Control{0.0, 0.0, 0.0}));
  std::vector<VehicleState> states = rollout(x0, controls, params);
  double cost = trajectory_cost(controls, states, reference, weights);

  SmoothResult res;
  res.initial_cost = cost;
  auto grad_norm = [&] {
    return projected_gradient_norm(
        controls, mpc_cost_gradient(controls, x0, reference, weights, params), bounds);
  };
  double gnorm = grad_norm();
  double mu = kMuMin;
  int it = 0;
  while (it < options.max_iterations && gnorm >= options.gradient_tolerance) {
    ++it;
    bool accepted = false;
    while (!accepted && mu <= kMuMax) {
      const Backward bw = backward_pass(states, controls, reference, weights, bounds, params, mu);
      if (!bw.ok) {
        mu *= 10.0;
        continue;
      }
      for (double alpha = 1.0; alpha > 1e-10 && !accepted; alpha *= 0.5) {
        std::vector<Control> trial(horizon);
        std::vector<VehicleState> trial_states;
        trial_states.reserve(horizon + 1);
        trial_states.push_back(x0);
        for (std::size_t t = 0; t < horizon; ++t) {
          const ControlVec du =
              alpha * bw.k[t] + bw.gain[t] * state_delta(trial_states[t], states[t]);
          Control u{};
          for (int i = 0; i < kControlDim; ++i) u[i] = controls[t][i] + du(i);
          trial[t] = bounds.clamp(u);
          trial_states.push_back(dynamics_step(trial_states[t], trial[t], params));
        }
        const double trial_cost = trajectory_cost(trial, trial_states, reference, weights);
        if (std::isfinite(trial_cost) && trial_cost < cost) {
          controls = std::move(trial);
          states = std::move(trial_states);
          cost = trial_cost;
          accepted = true;
        }
      }
      if (accepted) {
        mu = std::max(kMuMin, mu * 0.1);
      } else {
        mu *= 10.0;
      }
    }
    if (!accepted) break;
    gnorm = grad_norm();
  }

  res.controls = std::move(controls);
  res.states = rollout(x0, res.controls, params);
  res.cost = trajectory_cost(res.controls, res.states, reference, weights);
  res.trajectory = poses_of(res.states, params.dt);
  res.gradient_norm = gnorm;
  res.converged = gnorm < options.gradient_tolerance;
  res.iterations = it;
  return res;
}

SmoothResult smooth(const Trajectory& ref, const VehicleState& x0, const MpcWeights& weights,
                    const ControlBounds& bounds, const DynamicsParams& params,
                    const SmootherOptions& options) {
  params.validate();
  return smooth_states(build_reference(ref, x0, params.dt), x0, weights, bounds, params, options);
}

Trajectory resample(const Trajectory& fine, const Pose2D& start, double dt, std::size_t count) {
  fine.validate();
  if (!(dt > 0.0)) throw DomainError("dt must be positive");
  Trajectory out;
  out.dt = dt;
  out.points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    double tau = static_cast<double>(i + 1) * dt / fine.dt;  // in fine steps, 0 = start
    const double nearest = std::round(tau);
    if (std::abs(tau - nearest) < 1e-9) tau = nearest;
    if (tau > static_cast<double>(fine.size())) {
      throw DomainError("resample beyond the end of the trajectory");
    }
    const auto seg = static_cast<std::size_t>(std::floor(tau));
    const double f = tau - static_cast<double>(seg);
    const Pose2D& a = seg == 0 ? start : fine.points[seg - 1];
    if (f == 0.0) {
      out.points.push_back(a);
      continue;
    }
    const Pose2D& b = fine.points[seg];
    out.points.emplace_back(a.x + f * (b.x - a.x), a.y + f * (b.y - a.y),
                            a.yaw + f * wrap_angle(b.yaw - a.yaw));
  }
  return out;
}

}  // namespace trajmix::mpc
