#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace trajmix {

inline constexpr double kPi = 3.14159265358979323846;

/// Maps any finite angle into (-pi, pi].
double wrap_angle(double theta);

/// Planar pose. Yaw is kept in (-pi, pi] by every operation in this library.
struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;

  Pose2D() = default;
  Pose2D(double x_, double y_, double yaw_) : x(x_), y(y_), yaw(wrap_angle(yaw_)) {}

  friend bool operator==(const Pose2D&, const Pose2D&) = default;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Expresses a world point in the frame attached to `ego`.
Point2 world_to_ego(const Pose2D& ego, Point2 point);

/// Inverse of world_to_ego.
Point2 ego_to_world(const Pose2D& ego, Point2 point);

/// Pose of `pose` as seen from `ego` (position and wrapped relative yaw).
Pose2D pose_world_to_ego(const Pose2D& ego, const Pose2D& pose);
Pose2D pose_ego_to_world(const Pose2D& ego, const Pose2D& pose);

/// Full state of the nine-state kinematic vehicle model used by the smoother.
struct VehicleState {
  Pose2D pose;
  double vx = 0.0;        // m/s, along the body axis
  double vy = 0.0;        // m/s, lateral
  double yaw_rate = 0.0;  // rad/s
  double ax = 0.0;        // m/s^2
  double ay = 0.0;        // m/s^2
  double yaw_acc = 0.0;   // rad/s^2

  bool finite() const;

  /// Packs into [x, y, yaw, vx, vy, yaw_rate, ax, ay, yaw_acc].
  std::array<double, 9> to_array() const;
  static VehicleState from_array(const std::array<double, 9>& a);

  friend bool operator==(const VehicleState&, const VehicleState&) = default;
};

/// Sequence of future poses sampled every `dt` seconds. Point i is at time (i + 1) * dt
/// relative to the pose the trajectory was predicted from.
struct Trajectory {
  std::vector<Pose2D> points;
  double dt = 1.0;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  const Pose2D& back() const { return points.back(); }

  /// Throws DomainError unless non-empty with finite values and positive dt.
  void validate() const;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// One concrete future with the probability inherited from its mixture component.
struct TrajectorySample {
  Trajectory trajectory;
  double probability = 0.0;
  std::size_t mixture_index = 0;
  bool refined = false;
  /// Set on entries that were appended as duplicates to reach the requested sample count.
  bool padded = false;
};

Trajectory transform_to_world(const Pose2D& ego, const Trajectory& local);
Trajectory transform_to_ego(const Pose2D& ego, const Trajectory& world);

}  // namespace trajmix
