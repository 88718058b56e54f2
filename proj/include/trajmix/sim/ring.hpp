#pragma once

#include <vector>

#include "trajmix/core/geometry.hpp"
#include "trajmix/core/rng.hpp"
#include "trajmix/training/trainer.hpp"

namespace trajmix::sim {

inline constexpr std::size_t kRingFeatureDim = 32;

/// Counter-clockwise motion on a circle centred at the origin.
struct RingScenario {
  double radius = 50.0;
  double speed = 1.0;
  double rate = 1.0;  // Hz
  std::size_t history_frames = 10;

  void validate() const;
  double dt() const { return 1.0 / rate; }
  /// Angle swept per frame.
  double angle_step() const { return speed / (rate * radius); }
  /// Pose on the circle at polar angle `angle`, heading along the motion.
  Pose2D pose_at(double angle) const;
  /// Closest circle point to p; (radius, 0) for the centre itself.
  Point2 nearest_point(Point2 p) const;
};

/// Poses up to and including the current one plus the ground-truth future, in world
/// coordinates.
struct RingSample {
  std::vector<Pose2D> history;  // oldest first; back() is the current pose
  Trajectory future;
};

/// Frames of context needed for a causal window of `causal_len` feature frames.
std::size_t ring_context_frames(const RingScenario& sc, std::size_t causal_len,
                                std::size_t interval);

/// Episodes at uniformly random start angles, each with `context_frames` history poses and
/// `future_steps` future poses sampled at the scenario rate.
std::vector<RingSample> generate_ring_data(const RingScenario& sc, std::size_t n_episodes,
                                           std::size_t context_frames, std::size_t future_steps,
                                           Rng& rng);

/// 30 relative pose values of the history (x, y, yaw per frame, oldest first) followed by
/// the nearest circle point of the newest pose, all expressed in the `anchor` frame.
std::vector<double> ring_features(const std::vector<Pose2D>& history, const RingScenario& sc,
                                  const Pose2D& anchor);
/// Same with the newest history pose as anchor.
std::vector<double> ring_features(const std::vector<Pose2D>& history, const RingScenario& sc);

/// Feature window for the causal encoder. Each frame uses the history_frames poses ending at
/// it; every frame is expressed in the frame of the newest pose.
training::Window ring_window(const std::vector<Pose2D>& context, const RingScenario& sc,
                             std::size_t causal_len, std::size_t interval);

/// Current state in its own frame: zero pose with backward-difference velocities.
VehicleState ring_start_state(const std::vector<Pose2D>& context, const RingScenario& sc);

/// Ideal continuation: `steps` circle poses starting from the nearest point of `from`.
Trajectory ring_future(const RingScenario& sc, const Pose2D& from, std::size_t steps);

/// Ring windows with rigid history displacement as augmentation. The displaced agent's target
/// is the ideal circle continuation from its nearest circle point.
class RingDataset : public training::Dataset {
 public:
  RingDataset(RingScenario sc, std::vector<RingSample> samples, std::size_t causal_len,
              std::size_t interval);

  std::size_t size() const override { return samples_.size(); }
  training::TrainingExample example(std::size_t i, double data_std, Rng& rng) const override;
  /// Example from explicit world poses, no augmentation.
  training::TrainingExample make_example(const std::vector<Pose2D>& context,
                                         std::size_t future_steps) const;

  const std::vector<RingSample>& samples() const { return samples_; }
  const RingScenario& scenario() const { return sc_; }

 private:
  RingScenario sc_;
  std::vector<RingSample> samples_;
  std::size_t causal_len_;
  std::size_t interval_;
};

}  // namespace trajmix::sim
