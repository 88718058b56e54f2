#pragma once

#include <vector>

#include "trajmix/core/geometry.hpp"

namespace trajmix::sim {

inline constexpr double kOffroadThreshold = 2.0;    // m
inline constexpr double kDiscomfortThreshold = 3.0;  // m/s^2

struct MetricsReport {
  double offroad_rate = 0.0;
  double discomfort_rate = 0.0;
  double l2_error = 0.0;
  std::size_t n_rollouts = 0;
};

/// Circle reference path; lateral deviation is measured radially.
struct CirclePath {
  Point2 center;
  double radius = 50.0;

  double deviation(Point2 p) const;
};

/// Fraction of rollouts whose maximum lateral deviation exceeds `threshold`.
double offroad_rate(const std::vector<Trajectory>& rollouts, const CirclePath& path,
                    double threshold = kOffroadThreshold);

/// Central-difference acceleration magnitudes at the interior points of `traj`.
std::vector<double> accelerations(const Trajectory& traj);

/// Fraction of interior timesteps whose acceleration magnitude exceeds `threshold`.
/// Throws DomainError for fewer than three points.
double discomfort_rate(const Trajectory& traj, double threshold = kDiscomfortThreshold);

/// Pooled over several trajectories: exceeding steps / interior steps.
double discomfort_rate(const std::vector<Trajectory>& trajs,
                       double threshold = kDiscomfortThreshold);

/// Mean planar distance between corresponding points. Throws DimensionError on length mismatch.
double l2_error(const Trajectory& pred, const Trajectory& gt);

/// l2 averaged over pairs, offroad over `executed`, discomfort pooled over `executed`.
MetricsReport evaluate(const std::vector<Trajectory>& executed, const std::vector<Trajectory>& gt,
                       const CirclePath& path);

/// `traj` with `start` prepended, keeping dt.
Trajectory with_start(const Pose2D& start, const Trajectory& traj);

}  // namespace trajmix::sim
