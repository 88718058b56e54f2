#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "trajmix/causal/encoder.hpp"
#include "trajmix/head/variational_head.hpp"
#include "trajmix/scene/encoder.hpp"

namespace trajmix::training {

/// Which per-frame encoder feeds the causal encoder.
enum class FrameInput { kScene, kFeatures };

struct ModelConfig {
  FrameInput input = FrameInput::kScene;
  scene::SceneEncoderConfig scene;
  std::size_t feature_dim = 32;  // width of flat feature frames
  causal::CausalEncoderConfig causal;
  head::HeadConfig head;
  double dropout = 0.0;

  /// Shared d_model across the three stages, consistent widths and positive sizes.
  void validate() const;
};

/// Frames of one prediction window, oldest first, all in the anchor frame.
/// Exactly one of the two members is used, as chosen by ModelConfig::input.
struct Window {
  std::vector<scene::SceneSnapshot> scenes;
  std::vector<std::vector<double>> features;

  std::size_t size() const { return scenes.empty() ? features.size() : scenes.size(); }
};

/// Frame encoder + causal encoder + variational mixture head.
class TrajectoryModel {
 public:
  static TrajectoryModel create(tensor::ParameterStore& store, const ModelConfig& cfg, Rng& rng);

  const ModelConfig& config() const { return cfg_; }

  /// n x d_model frame embeddings, n = window size (at most causal_len frames are kept).
  tensor::Var encode_frames(tensor::Tape& tape, const Window& window,
                            const tensor::DropoutContext* dropout = nullptr) const;

  head::HeadOutput forward(tensor::Tape& tape, const Window& window, causal::Mode mode, Rng* rng,
                           const tensor::DropoutContext* dropout = nullptr) const;

  /// Inference-mode mixture. Throws DomainError on non-finite outputs.
  head::GaussianMixtureTrajectory predict(const tensor::ParameterStore& store,
                                          const Window& window) const;

 private:
  TrajectoryModel(ModelConfig cfg, causal::CausalEncoder c, head::VariationalHead h)
      : cfg_(std::move(cfg)), causal_(std::move(c)), head_(std::move(h)) {}

  ModelConfig cfg_;
  std::optional<scene::SceneEncoder> scene_;
  std::optional<tensor::Mlp> features_;
  causal::CausalEncoder causal_;
  head::VariationalHead head_;
};

}  // namespace trajmix::training
