#include "trajmix/sim/ring.hpp"

#include <cmath>
#include <string>

#include "trajmix/causal/encoder.hpp"
#include "trajmix/core/errors.hpp"

namespace trajmix::sim {

void RingScenario::validate() const {
  if (!(radius > 0.0) || !std::isfinite(radius)) throw DomainError("radius must be positive");
  if (!(speed > 0.0) || !std::isfinite(speed)) throw DomainError("speed must be positive");
  if (!(rate > 0.0) || !std::isfinite(rate)) throw DomainError("rate must be positive");
  if (history_frames == 0) throw DomainError("history_frames must be positive");
}

Pose2D RingScenario::pose_at(double angle) const {
  return Pose2D(radius * std::cos(angle), radius * std::sin(angle), angle + kPi / 2.0);
}

Point2 RingScenario::nearest_point(Point2 p) const {
  const double r = std::hypot(p.x, p.y);
  if (r == 0.0) return {radius, 0.0};
  return {p.x * radius / r, p.y * radius / r};
}

std::size_t ring_context_frames(const RingScenario& sc, std::size_t causal_len,
                                std::size_t interval) {
  if (causal_len == 0 || interval == 0) throw DomainError("causal_len and interval must be positive");
  return sc.history_frames + (causal_len - 1) * interval;
}

std::vector<RingSample> generate_ring_data(const RingScenario& sc, std::size_t n_episodes,
                                           std::size_t context_frames, std::size_t future_steps,
                                           Rng& rng) {
  sc.validate();
  if (context_frames == 0) throw DomainError("context_frames must be positive");
  std::vector<RingSample> out;
  out.reserve(n_episodes);
  const double step = sc.angle_step();
  for (std::size_t e = 0; e < n_episodes; ++e) {
    const double start = rng.uniform(-kPi, kPi);
    RingSample s;
    for (std::size_t i = 0; i < context_frames; ++i) {
      const double back = static_cast<double>(context_frames - 1 - i);
      s.history.push_back(sc.pose_at(start - back * step));
    }
    s.future.dt = sc.dt();
    for (std::size_t i = 1; i <= future_steps; ++i) {
      s.future.points.push_back(sc.pose_at(start + static_cast<double>(i) * step));
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<double> ring_features(const std::vector<Pose2D>& history, const RingScenario& sc,
                                  const Pose2D& anchor) {
  if (history.size() != sc.history_frames) {
    throw DimensionError("ring features need " + std::to_string(sc.history_frames) +
                         " poses, got " + std::to_string(history.size()));
  }
  std::vector<double> f;
  f.reserve(3 * history.size() + 2);
  for (const Pose2D& p : history) {
    const Pose2D rel = pose_world_to_ego(anchor, p);
    f.push_back(rel.x);
    f.push_back(rel.y);
    f.push_back(rel.yaw);
  }
  const Point2 near = world_to_ego(anchor, sc.nearest_point({history.back().x, history.back().y}));
  f.push_back(near.x);
  f.push_back(near.y);
  return f;
}

std::vector<double> ring_features(const std::vector<Pose2D>& history, const RingScenario& sc) {
  if (history.empty()) throw DimensionError("empty history");
  return ring_features(history, sc, history.back());
}

training::Window ring_window(const std::vector<Pose2D>& context, const RingScenario& sc,
                             std::size_t causal_len, std::size_t interval) {
  const std::size_t h = sc.history_frames;
  if (context.size() < h) throw DimensionError("context shorter than history_frames");
  const Pose2D& anchor = context.back();
  // Frame j ends at context index j + h - 1.
  const std::size_t n_frames = context.size() - h + 1;
  training::Window w;
  for (std::size_t j : causal::select_history_indices(n_frames, causal_len, interval)) {
    const std::vector<Pose2D> hist(context.begin() + static_cast<std::ptrdiff_t>(j),
                                   context.begin() + static_cast<std::ptrdiff_t>(j + h));
    w.features.push_back(ring_features(hist, sc, anchor));
  }
  return w;
}

VehicleState ring_start_state(const std::vector<Pose2D>& context, const RingScenario& sc) {
  VehicleState s;
  if (context.size() < 2) return s;
  const Pose2D& cur = context.back();
  const Pose2D prev = pose_world_to_ego(cur, context[context.size() - 2]);
  // Displacement from the previous frame to the current one, in the current frame.
  s.vx = -prev.x * sc.rate;
  s.vy = -prev.y * sc.rate;
  s.yaw_rate = -prev.yaw * sc.rate;
  return s;
}

Trajectory ring_future(const RingScenario& sc, const Pose2D& from, std::size_t steps) {
  const Point2 near = sc.nearest_point({from.x, from.y});
  const double base = std::atan2(near.y, near.x);
  Trajectory t;
  t.dt = sc.dt();
  for (std::size_t i = 1; i <= steps; ++i) {
    t.points.push_back(sc.pose_at(base + static_cast<double>(i) * sc.angle_step()));
  }
  return t;
}

RingDataset::RingDataset(RingScenario sc, std::vector<RingSample> samples, std::size_t causal_len,
                         std::size_t interval)
    : sc_(sc), samples_(std::move(samples)), causal_len_(causal_len), interval_(interval) {
  sc_.validate();
  const std::size_t need = ring_context_frames(sc_, causal_len_, interval_);
  for (const auto& s : samples_) {
    if (s.history.size() < need) throw DimensionError("ring sample shorter than the context");
  }
}

training::TrainingExample RingDataset::make_example(const std::vector<Pose2D>& context,
                                                    std::size_t future_steps) const {
  training::TrainingExample e;
  e.window = ring_window(context, sc_, causal_len_, interval_);
  e.future = transform_to_ego(context.back(), ring_future(sc_, context.back(), future_steps));
  e.start = ring_start_state(context, sc_);
  return e;
}

training::TrainingExample RingDataset::example(std::size_t i, double data_std, Rng& rng) const {
  if (i >= samples_.size()) throw DimensionError("example index out of range");
  if (!(data_std >= 0.0)) throw DomainError("data_std must be >= 0");
  const RingSample& s = samples_[i];
  if (data_std == 0.0) return make_example(s.history, s.future.size());
  const double dx = rng.normal(0.0, data_std);
  const double dy = rng.normal(0.0, data_std);
  std::vector<Pose2D> moved;
  moved.reserve(s.history.size());
  for (const Pose2D& p : s.history) moved.emplace_back(p.x + dx, p.y + dy, p.yaw);
  return make_example(moved, s.future.size());
}

}  // namespace trajmix::sim
