#include "trajmix/scene/snapshot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "trajmix/core/errors.hpp"

namespace trajmix::scene {

bool FeatureRows::any_valid() const {
  return std::any_of(mask.begin(), mask.end(), [](bool b) { return b; });
}

std::size_t FeatureRows::valid_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

void FeatureRows::push_row(const std::vector<double>& row, bool valid) {
  if (row.size() != width) {
    throw DimensionError("feature row of width " + std::to_string(row.size()) + ", expected " +
                         std::to_string(width));
  }
  values.insert(values.end(), row.begin(), row.end());
  mask.push_back(valid);
}

namespace {

void check_rows(const FeatureRows& f, std::size_t width, const std::string& what) {
  if (f.width != width) {
    throw DimensionError(what + ": width " + std::to_string(f.width) + ", expected " +
                         std::to_string(width));
  }
  if (f.values.size() != f.mask.size() * width) {
    throw DimensionError(what + ": " + std::to_string(f.values.size()) + " values for " +
                         std::to_string(f.mask.size()) + " masked rows");
  }
  for (std::size_t r = 0; r < f.rows(); ++r) {
    if (!f.mask[r]) continue;
    for (std::size_t c = 0; c < width; ++c) {
      if (!std::isfinite(f.at(r, c))) throw DomainError(what + ": non-finite value");
    }
  }
}

// Position column pairs per feature layout.
const std::vector<std::size_t>& position_columns(std::size_t width) {
  static const std::vector<std::size_t> agent{0};
  static const std::vector<std::size_t> lane{0, 2, 4};
  static const std::vector<std::size_t> cross{0};
  if (width == kLaneFeatures) return lane;
  if (width == kCrossFeatures) return cross;
  return agent;
}

FeatureRows shifted(const FeatureRows& f, Point2 offset) {
  FeatureRows out = f;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    if (!out.mask[r]) continue;
    for (std::size_t c : position_columns(out.width)) {
      out.at(r, c) -= offset.x;
      out.at(r, c + 1) -= offset.y;
    }
  }
  return out;
}

double newest_distance(const FeatureRows& f, Point2 ego) {
  for (std::size_t r = f.rows(); r-- > 0;) {
    if (f.mask[r]) return std::hypot(f.at(r, 0) - ego.x, f.at(r, 1) - ego.y);
  }
  return std::numeric_limits<double>::infinity();
}

double closest_distance(const FeatureRows& f, Point2 ego) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < f.rows(); ++r) {
    if (f.mask[r]) best = std::min(best, std::hypot(f.at(r, 0) - ego.x, f.at(r, 1) - ego.y));
  }
  return best;
}

template <class Dist>
std::vector<FeatureRows> keep_nearest(const std::vector<FeatureRows>& items, std::size_t cap,
                                      Dist dist) {
  if (items.size() <= cap) return items;
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> d(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) d[i] = dist(items[i]);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
  order.resize(cap);
  std::sort(order.begin(), order.end());
  std::vector<FeatureRows> out;
  out.reserve(cap);
  for (std::size_t i : order) out.push_back(items[i]);
  return out;
}

}  // namespace

void SceneSnapshot::validate() const {
  check_rows(ego_history, kAgentFeatures, "ego_history");
  if (!ego_history.any_valid()) throw DomainError("ego_history has no valid frame");
  for (std::size_t i = 0; i < agents.size(); ++i)
    check_rows(agents[i], kAgentFeatures, "agents[" + std::to_string(i) + "]");
  for (std::size_t i = 0; i < lanes.size(); ++i)
    check_rows(lanes[i], kLaneFeatures, "lanes[" + std::to_string(i) + "]");
  for (std::size_t i = 0; i < crosswalks.size(); ++i)
    check_rows(crosswalks[i], kCrossFeatures, "crosswalks[" + std::to_string(i) + "]");
}

Point2 ego_position(const SceneSnapshot& s) {
  for (std::size_t r = s.ego_history.rows(); r-- > 0;) {
    if (s.ego_history.mask[r]) return {s.ego_history.at(r, 0), s.ego_history.at(r, 1)};
  }
  throw DomainError("ego_history has no valid frame");
}

SceneSnapshot apply_entity_caps(const SceneSnapshot& s, const EntityCaps& caps) {
  const Point2 ego = ego_position(s);
  SceneSnapshot out;
  out.ego_history = s.ego_history;
  out.agents = keep_nearest(s.agents, caps.max_agents,
                            [&](const FeatureRows& f) { return newest_distance(f, ego); });
  out.lanes = keep_nearest(s.lanes, caps.max_lanes,
                           [&](const FeatureRows& f) { return closest_distance(f, ego); });
  out.crosswalks = keep_nearest(s.crosswalks, caps.max_crosswalks,
                                [&](const FeatureRows& f) { return closest_distance(f, ego); });
  return out;
}

SceneSnapshot shift_scene(const SceneSnapshot& s, Point2 offset) {
  SceneSnapshot out;
  out.ego_history = shifted(s.ego_history, offset);
  for (const auto& a : s.agents) out.agents.push_back(shifted(a, offset));
  for (const auto& l : s.lanes) out.lanes.push_back(shifted(l, offset));
  for (const auto& c : s.crosswalks) out.crosswalks.push_back(shifted(c, offset));
  return out;
}

Point2 draw_anchor_offset(double stddev, Rng& rng) {
  if (stddev < 0.0) throw DomainError("negative augmentation std");
  if (stddev == 0.0) return {0.0, 0.0};
  const double dx = rng.normal(0.0, stddev);
  const double dy = rng.normal(0.0, stddev);
  return {dx, dy};
}

}  // namespace trajmix::scene
