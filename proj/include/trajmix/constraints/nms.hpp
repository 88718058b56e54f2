#pragma once

#include <vector>

#include "trajmix/core/geometry.hpp"
#include "trajmix/core/rng.hpp"
#include "trajmix/head/mixture.hpp"

namespace trajmix::constraints {

struct NmsConfig {
  std::size_t n_samples = 6;
  double d_min = 1.4;
  std::size_t m_sub = 6;  // draws per mixture component
  double sigma_floor = 1e-6;

  void validate() const;
};

/// Diverse sample set: per-component draws sorted by mixture weight, greedy endpoint
/// suppression, then cyclic duplication of the selection up to n_samples.
/// Action dimensions beyond (x, y, yaw) are ignored; with two dimensions yaw is zero.
std::vector<TrajectorySample> nms_sample(const head::GaussianMixtureTrajectory& gmm,
                                         const NmsConfig& cfg, Rng& rng, double dt = 1.0);

}  // namespace trajmix::constraints
