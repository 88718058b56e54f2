#include "trajmix/constraints/sector.hpp"

#include <algorithm>
#include <cmath>

#include "trajmix/core/errors.hpp"

namespace trajmix::constraints {

using tensor::Tape;
using tensor::Tensor;
using tensor::Var;

void SectorSpec::validate() const {
  if (!(r_max > 0.0) || !std::isfinite(r_max)) throw DomainError("sector r_max must be positive");
  if (!(theta_max > 0.0) || theta_max > kPi) throw DomainError("sector theta_max must be in (0, pi]");
}

namespace {

// Slack that keeps the projection exactly idempotent despite rounding of cos/sin.
double radius_slack(const SectorSpec& spec) { return 1e-12 * std::max(1.0, spec.r_max); }
constexpr double kAngleSlack = 1e-12;

bool inside(double x, double y, const SectorSpec& spec) {
  const double r = std::hypot(x, y);
  if (r > spec.r_max + radius_slack(spec)) return false;
  if (r == 0.0) return true;
  return std::abs(std::atan2(y, x)) <= spec.theta_max + kAngleSlack;
}

Point2 project_local(double x, double y, const SectorSpec& spec) {
  if (inside(x, y, spec)) return {x, y};
  const double r = std::min(std::hypot(x, y), spec.r_max);
  const double a = std::clamp(std::atan2(y, x), -spec.theta_max, spec.theta_max);
  return {r * std::cos(a), r * std::sin(a)};
}

}  // namespace

Point2 sector_project(Point2 point, const Pose2D& ego, const SectorSpec& spec) {
  const Point2 local = world_to_ego(ego, point);
  if (inside(local.x, local.y, spec)) return point;
  return ego_to_world(ego, project_local(local.x, local.y, spec));
}

Trajectory sector_project_trajectory(const Trajectory& traj, const Pose2D& ego,
                                     const SectorSpec& spec) {
  Trajectory out = traj;
  for (auto& p : out.points) {
    const Point2 q = sector_project({p.x, p.y}, ego, spec);
    p.x = q.x;
    p.y = q.y;
  }
  return out;
}

Var sector_project_local(Var xy, const SectorSpec& spec) {
  if (xy.cols() != 2) throw DimensionError("sector projection expects N x 2 points");
  const std::size_t n = xy.rows();
  const Tensor& in = xy.value();
  Tensor out(xy.shape());
  // Row-major 2x2 Jacobian per point.
  std::vector<double> jac(4 * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = in[2 * i], y = in[2 * i + 1];
    double* J = jac.data() + 4 * i;
    if (inside(x, y, spec)) {
      out[2 * i] = x;
      out[2 * i + 1] = y;
      J[0] = J[3] = 1.0;
      continue;
    }
    const double r = std::hypot(x, y);
    const double a = std::atan2(y, x);
    const bool r_free = r <= spec.r_max;
    const bool a_free = std::abs(a) <= spec.theta_max;
    const double rp = r_free ? r : spec.r_max;
    const double ap = a_free ? a : std::clamp(a, -spec.theta_max, spec.theta_max);
    const double c = std::cos(ap), s = std::sin(ap);
    out[2 * i] = rp * c;
    out[2 * i + 1] = rp * s;
    // d(out)/d(r', a') . d(r', a')/d(r, a) . d(r, a)/d(x, y)
    const double dr_dx = x / r, dr_dy = y / r;
    const double da_dx = -y / (r * r), da_dy = x / (r * r);
    const double gr = r_free ? 1.0 : 0.0;
    const double ga = a_free ? 1.0 : 0.0;
    J[0] = c * gr * dr_dx - rp * s * ga * da_dx;
    J[1] = c * gr * dr_dy - rp * s * ga * da_dy;
    J[2] = s * gr * dr_dx + rp * c * ga * da_dx;
    J[3] = s * gr * dr_dy + rp * c * ga * da_dy;
  }
  const std::size_t xi = xy.id();
  return xy.tape().record(std::move(out), {xy},
                          [xi, n, jac = std::move(jac)](Tape& t, std::size_t self) {
                            const Tensor& g = t.grad(self);
                            Tensor& gx = t.grad_buffer(xi);
                            for (std::size_t i = 0; i < n; ++i) {
                              const double* J = jac.data() + 4 * i;
                              gx[2 * i] += g[2 * i] * J[0] + g[2 * i + 1] * J[2];
                              gx[2 * i + 1] += g[2 * i] * J[1] + g[2 * i + 1] * J[3];
                            }
                          });
}

}  // namespace trajmix::constraints
