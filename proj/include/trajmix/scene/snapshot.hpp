#pragma once

#include <cstddef>
#include <vector>

#include "trajmix/core/geometry.hpp"
#include "trajmix/core/rng.hpp"

namespace trajmix::scene {

inline constexpr std::size_t kAgentFeatures = 7;  // x, y, yaw, vx, vy, ax, ay
inline constexpr std::size_t kLaneFeatures = 10;  // x, y, left xy, right xy, dir xy, type, light
inline constexpr std::size_t kCrossFeatures = 5;  // x, y, dir xy, type

/// Row-major feature rows of fixed width with a per-row validity flag.
struct FeatureRows {
  std::size_t width = 0;
  std::vector<double> values;
  std::vector<bool> mask;

  FeatureRows() = default;
  explicit FeatureRows(std::size_t w) : width(w) {}

  std::size_t rows() const { return mask.size(); }
  bool any_valid() const;
  std::size_t valid_count() const;
  double at(std::size_t r, std::size_t c) const { return values[r * width + c]; }
  double& at(std::size_t r, std::size_t c) { return values[r * width + c]; }
  void push_row(const std::vector<double>& row, bool valid = true);

  friend bool operator==(const FeatureRows&, const FeatureRows&) = default;
};

/// One frame of scene input, expressed relative to the ego anchor.
struct SceneSnapshot {
  FeatureRows ego_history{kAgentFeatures};  // oldest first, newest last
  std::vector<FeatureRows> agents;          // each T_agent x 7
  std::vector<FeatureRows> lanes;           // each P x 10
  std::vector<FeatureRows> crosswalks;      // each P x 5

  /// Throws DimensionError on wrong widths or mask lengths, DomainError on non-finite
  /// valid values or an ego history without valid frames.
  void validate() const;

  friend bool operator==(const SceneSnapshot&, const SceneSnapshot&) = default;
};

struct EntityCaps {
  std::size_t max_agents = 32;
  std::size_t max_lanes = 32;
  std::size_t max_crosswalks = 16;
};

/// Position of the newest valid ego frame.
Point2 ego_position(const SceneSnapshot& s);

/// Keeps the entities nearest to the ego, preserving their original order. Distance of
/// an agent is taken from its newest valid frame; of a polyline from its closest valid point.
SceneSnapshot apply_entity_caps(const SceneSnapshot& s, const EntityCaps& caps);

/// Re-expresses all coordinates relative to an anchor moved by `offset`.
/// Only position columns change; directions, headings and velocities are untouched.
SceneSnapshot shift_scene(const SceneSnapshot& s, Point2 offset);

/// Offset drawn from N(0, std^2 I) for anchor perturbation.
Point2 draw_anchor_offset(double stddev, Rng& rng);

}  // namespace trajmix::scene
