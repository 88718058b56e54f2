#include "trajmix/core/geometry.hpp"

#include <cmath>

#include "trajmix/core/errors.hpp"

namespace trajmix {

double wrap_angle(double theta) {
  constexpr double two_pi = 2.0 * kPi;
  double r = std::fmod(theta, two_pi);  // (-2pi, 2pi), sign of theta
  if (r > kPi) {
    r -= two_pi;
  } else if (r <= -kPi) {
    r += two_pi;
  }
  return r;
}

Point2 world_to_ego(const Pose2D& ego, Point2 point) {
  const double c = std::cos(ego.yaw);
  const double s = std::sin(ego.yaw);
  const double dx = point.x - ego.x;
  const double dy = point.y - ego.y;
  return {dx * c + dy * s, -dx * s + dy * c};
}

Point2 ego_to_world(const Pose2D& ego, Point2 point) {
  const double c = std::cos(ego.yaw);
  const double s = std::sin(ego.yaw);
  return {ego.x + point.x * c - point.y * s, ego.y + point.x * s + point.y * c};
}

Pose2D pose_world_to_ego(const Pose2D& ego, const Pose2D& pose) {
  const Point2 p = world_to_ego(ego, {pose.x, pose.y});
  return {p.x, p.y, pose.yaw - ego.yaw};
}

Pose2D pose_ego_to_world(const Pose2D& ego, const Pose2D& pose) {
  const Point2 p = ego_to_world(ego, {pose.x, pose.y});
  return {p.x, p.y, pose.yaw + ego.yaw};
}

bool VehicleState::finite() const {
  for (double v : to_array()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::array<double, 9> VehicleState::to_array() const {
  return {pose.x, pose.y, pose.yaw, vx, vy, yaw_rate, ax, ay, yaw_acc};
}

VehicleState VehicleState::from_array(const std::array<double, 9>& a) {
  VehicleState s;
  s.pose = Pose2D(a[0], a[1], a[2]);
  s.vx = a[3];
  s.vy = a[4];
  s.yaw_rate = a[5];
  s.ax = a[6];
  s.ay = a[7];
  s.yaw_acc = a[8];
  return s;
}

void Trajectory::validate() const {
  if (points.empty()) throw DomainError("trajectory is empty");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("trajectory dt must be positive");
  for (const auto& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.yaw)) {
      throw DomainError("trajectory contains non-finite values");
    }
  }
}

Trajectory transform_to_world(const Pose2D& ego, const Trajectory& local) {
  Trajectory out{{}, local.dt};
  out.points.reserve(local.size());
  for (const auto& p : local.points) out.points.push_back(pose_ego_to_world(ego, p));
  return out;
}

Trajectory transform_to_ego(const Pose2D& ego, const Trajectory& world) {
  Trajectory out{{}, world.dt};
  out.points.reserve(world.size());
  for (const auto& p : world.points) out.points.push_back(pose_world_to_ego(ego, p));
  return out;
}

}  // namespace trajmix
