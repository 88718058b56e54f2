#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "trajmix/constraints/nms.hpp"
#include "trajmix/constraints/sector.hpp"
#include "trajmix/sim/metrics.hpp"
#include "trajmix/sim/ring.hpp"

namespace trajmix::sim {

/// What a predictor sees at one step: the feature window and, for oracles, the world pose
/// of the anchor frame the window is expressed in.
struct PredictionContext {
  const training::Window& window;
  Pose2D anchor;
};

/// Mixture over the future in the anchor frame.
using Predictor = std::function<head::GaussianMixtureTrajectory(const PredictionContext&)>;

struct ClosedLoopConfig {
  std::size_t n_steps = 100;
  std::size_t causal_len = 4;
  std::size_t interval = 1;
  constraints::NmsConfig nms;
  constraints::SectorSpec sector;
  training::SmoothingSettings smoothing;
  bool smooth = true;       // false executes the raw sample (ablation)
  bool keep_steps = false;  // record per-step samples

  void validate() const;
};

/// Per-step record in the anchor frame.
struct StepRecord {
  Pose2D anchor;  // world pose of the frame
  VehicleState start;
  std::vector<TrajectorySample> raw;  // NMS samples after sector projection
  std::vector<Trajectory> smoothed;   // smoother output resampled to the scenario rate
  std::size_t chosen = 0;
};

struct RolloutResult {
  Trajectory executed;      // world poses after each step
  Trajectory ground_truth;  // ideal circle at the same times
  std::vector<StepRecord> steps;
};

/// Receding-horizon loop: features, prediction, NMS sampling, sector projection and
/// smoothing; the highest-probability sample's smoothed pose one scenario step ahead is
/// executed (pose teleport). Throws DomainError naming the step on non-finite predictions.
RolloutResult closed_loop_rollout(const Predictor& predictor, const RingScenario& sc,
                                  const ClosedLoopConfig& cfg, double start_angle, Rng& rng);

/// `n` rollouts from random start angles with independent rng streams derived from `seed`.
std::vector<RolloutResult> run_rollouts(const Predictor& predictor, const RingScenario& sc,
                                        const ClosedLoopConfig& cfg, std::size_t n,
                                        std::uint64_t seed);

MetricsReport evaluate_rollouts(const std::vector<RolloutResult>& rollouts, const RingScenario& sc);

Predictor model_predictor(const training::TrajectoryModel& model,
                          const tensor::ParameterStore& store);

/// Emits the ideal circle continuation in every component with tiny spread.
Predictor oracle_predictor(const RingScenario& sc, std::size_t mixtures, std::size_t future_steps);

/// Paired discomfort of raw NMS samples and their smoothed versions (start pose prepended,
/// scenario rate) pooled over the recorded steps.
struct DiscomfortComparison {
  double raw = 0.0;
  double smoothed = 0.0;
  std::size_t scenes = 0;
};
DiscomfortComparison compare_smoothing_discomfort(const std::vector<StepRecord>& steps);

}  // namespace trajmix::sim
