#include "trajmix/sim/metrics.hpp"

#include <cmath>
#include <string>

#include "trajmix/core/errors.hpp"

namespace trajmix::sim {

double CirclePath::deviation(Point2 p) const {
  return std::abs(std::hypot(p.x - center.x, p.y - center.y) - radius);
}

double offroad_rate(const std::vector<Trajectory>& rollouts, const CirclePath& path,
                    double threshold) {
  if (rollouts.empty()) return 0.0;
  std::size_t off = 0;
  for (const auto& r : rollouts) {
    double worst = 0.0;
    for (const Pose2D& p : r.points) worst = std::max(worst, path.deviation({p.x, p.y}));
    if (worst > threshold) ++off;
  }
  return static_cast<double>(off) / static_cast<double>(rollouts.size());
}

std::vector<double> accelerations(const Trajectory& traj) {
  if (traj.size() < 3) throw DomainError("acceleration needs at least three points");
  if (!(traj.dt > 0.0)) throw DomainError("dt must be positive");
  const double inv = 1.0 / (traj.dt * traj.dt);
  std::vector<double> out;
  out.reserve(traj.size() - 2);
  for (std::size_t t = 1; t + 1 < traj.size(); ++t) {
    const Pose2D& a = traj.points[t - 1];
    const Pose2D& b = traj.points[t];
    const Pose2D& c = traj.points[t + 1];
    out.push_back(std::hypot(a.x - 2.0 * b.x + c.x, a.y - 2.0 * b.y + c.y) * inv);
  }
  return out;
}

double discomfort_rate(const Trajectory& traj, double threshold) {
  return discomfort_rate(std::vector<Trajectory>{traj}, threshold);
}

double discomfort_rate(const std::vector<Trajectory>& trajs, double threshold) {
  std::size_t hits = 0, total = 0;
  for (const auto& t : trajs) {
    for (double a : accelerations(t)) {
      if (a > threshold) ++hits;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

double l2_error(const Trajectory& pred, const Trajectory& gt) {
  if (pred.size() != gt.size()) {
    throw DimensionError("l2_error lengths " + std::to_string(pred.size()) + " and " +
                         std::to_string(gt.size()));
  }
  if (pred.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    acc += std::hypot(pred.points[i].x - gt.points[i].x, pred.points[i].y - gt.points[i].y);
  }
  return acc / static_cast<double>(pred.size());
}

MetricsReport evaluate(const std::vector<Trajectory>& executed, const std::vector<Trajectory>& gt,
                       const CirclePath& path) {
  if (executed.size() != gt.size()) throw DimensionError("rollout and truth counts differ");
  MetricsReport r;
  r.n_rollouts = executed.size();
  if (executed.empty()) return r;
  r.offroad_rate = offroad_rate(executed, path);
  r.discomfort_rate = discomfort_rate(executed);
  double l2 = 0.0;
  for (std::size_t i = 0; i < executed.size(); ++i) l2 += l2_error(executed[i], gt[i]);
  r.l2_error = l2 / static_cast<double>(executed.size());
  return r;
}

Trajectory with_start(const Pose2D& start, const Trajectory& traj) {
  Trajectory out;
  out.dt = traj.dt;
  out.points.reserve(traj.size() + 1);
  out.points.push_back(start);
  out.points.insert(out.points.end(), traj.points.begin(), traj.points.end());
  return out;
}

}  // namespace trajmix::sim
