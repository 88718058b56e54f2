#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "trajmix/constraints/sector.hpp"
#include "trajmix/mpc/smoother.hpp"
#include "trajmix/training/losses.hpp"
#include "trajmix/training/model.hpp"
#include "trajmix/training/optimizer.hpp"

namespace trajmix::training {

enum class LossTarget { kRaw, kSmoothed };

/// One supervised window. The future and the start state share the window's frame.
struct TrainingExample {
  Window window;
  Trajectory future;
  VehicleState start;  // current state; its pose anchors the sector
};

class Dataset {
 public:
  virtual ~Dataset() = default;
  virtual std::size_t size() const = 0;
  /// Example i with anchor augmentation of standard deviation data_std.
  virtual TrainingExample example(std::size_t i, double data_std, Rng& rng) const = 0;
};

/// Shifts the ego anchor of a snapshot by N(0, data_std^2 I) and re-derives all relative
/// positions (a rigid shift of every entity).
scene::SceneSnapshot augment_ego(const scene::SceneSnapshot& s, double data_std, Rng& rng);

/// Applies the same anchor offset to every frame, the future and the start state.
TrainingExample shift_example(const TrainingExample& e, Point2 offset);

/// Fixed list of scene-window examples with rigid anchor augmentation.
class SceneDataset : public Dataset {
 public:
  explicit SceneDataset(std::vector<TrainingExample> examples) : examples_(std::move(examples)) {}
  std::size_t size() const override { return examples_.size(); }
  TrainingExample example(std::size_t i, double data_std, Rng& rng) const override;

 private:
  std::vector<TrainingExample> examples_;
};

struct SmoothingSettings {
  mpc::MpcWeights weights;
  mpc::ControlBounds bounds;
  mpc::DynamicsParams dynamics;
  mpc::SmootherOptions options;
};

struct TrainConfig {
  int iterations = 1000;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double data_std = 2.0;
  LossTarget loss_target = LossTarget::kRaw;
  LossWeights loss;
  constraints::SectorSpec sector;
  double sigma_floor = 1e-6;
  SmoothingSettings smoothing;

  void validate() const;
  AdamWConfig optimizer() const;
};

struct LossRecord {
  int iteration = 0;
  LossBreakdown loss;
};

struct TrainResult {
  std::vector<LossRecord> history;
};

/// Composite loss of one example on `tape`: train-mode forward, one draw per mixture,
/// sector projection and, for the smoothed target, a straight-through smoother pass.
LossVars example_loss(tensor::Tape& tape, const TrajectoryModel& model, const TrainingExample& e,
                      const TrainConfig& cfg, Rng& rng);

/// Seeded loop of augment, forward, loss, backward and AdamW. Throws DomainError naming the
/// iteration when the loss is not finite.
TrainResult train(const TrajectoryModel& model, tensor::ParameterStore& store,
                  const Dataset& data, const TrainConfig& cfg,
                  const std::function<void(const LossRecord&)>& on_iteration = {});

/// Header `iteration,total,L_pos,L_yaw,L_unc,L_KL`.
void write_loss_csv(std::ostream& os, const std::vector<LossRecord>& history);
void write_loss_csv_file(const std::string& path, const std::vector<LossRecord>& history);

}  // namespace trajmix::training
