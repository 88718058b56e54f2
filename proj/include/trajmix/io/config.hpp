#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "trajmix/constraints/nms.hpp"
#include "trajmix/sim/closed_loop.hpp"
#include "trajmix/training/trainer.hpp"

namespace trajmix::io {

/// Config file does not exist or cannot be opened.
class ConfigFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Config file is not valid JSON.
class ConfigParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unknown key, wrong type or a value outside its allowed range.
class ConfigValueError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MpcSettings {
  mpc::DynamicsParams dynamics;
  mpc::MpcWeights weights;
  mpc::ControlBounds bounds;
  mpc::SmootherOptions options;

  training::SmoothingSettings smoothing() const { return {weights, bounds, dynamics, options}; }
};

/// Ring experiment sizes.
struct RingSettings {
  sim::RingScenario scenario;
  std::size_t episodes = 256;
  std::size_t rollouts = 20;
  std::size_t rollout_steps = 100;
};

struct RunConfig {
  RunConfig() { model.dropout = 0.1; }

  training::ModelConfig model;
  constraints::NmsConfig sampling;
  constraints::SectorSpec sector;
  MpcSettings mpc;
  training::LossWeights loss;
  training::TrainConfig train;  // loss, sector and smoothing members are synced from above
  RingSettings ring;
  std::uint64_t seed = 0;

  /// Throws ConfigValueError on any invalid value.
  void validate() const;
  training::TrainConfig train_config() const;
  sim::ClosedLoopConfig closed_loop_config() const;
};

nlohmann::json to_json(const RunConfig& c);
/// Starts from defaults and overrides present keys; rejects unknown keys.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::string& path);
void save_config(const RunConfig& c, const std::string& path);

}  // namespace trajmix::io
