#pragma once

#include "trajmix/core/geometry.hpp"
#include "trajmix/tensor/tape.hpp"

namespace trajmix::constraints {

struct SectorSpec {
  double r_max = 10.0;
  double theta_max = kPi / 4.0;

  /// Throws DomainError unless r_max > 0 and 0 < theta_max <= pi.
  void validate() const;
};

/// Clamps a world point into the sector of radius r_max and half-angle theta_max opening
/// along the ego heading. Points already inside are returned unchanged.
Point2 sector_project(Point2 point, const Pose2D& ego, const SectorSpec& spec);

/// Per-point projection of (x, y); yaw is left as predicted.
Trajectory sector_project_trajectory(const Trajectory& traj, const Pose2D& ego,
                                     const SectorSpec& spec);

/// Differentiable projection of an N x 2 tensor of points already expressed in the ego
/// frame. Interior points pass through with identity gradient.
tensor::Var sector_project_local(tensor::Var xy, const SectorSpec& spec);

}  // namespace trajmix::constraints
