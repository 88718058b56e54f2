#include "trajmix/training/model.hpp"

#include <cmath>

#include "trajmix/core/errors.hpp"

namespace trajmix::training {

using tensor::Tape;
using tensor::Tensor;
using tensor::Var;

void ModelConfig::validate() const {
  const std::size_t d = causal.d_model;
  if (d == 0 || head.d_model != d || (input == FrameInput::kScene && scene.d_model != d)) {
    throw DimensionError("scene, causal and head stages must share a positive d_model");
  }
  if (causal.heads == 0 || d % causal.heads != 0) throw DimensionError("heads must divide d_model");
  if (input == FrameInput::kScene && (scene.heads == 0 || d % scene.heads != 0)) {
    throw DimensionError("scene heads must divide d_model");
  }
  if (input == FrameInput::kFeatures && feature_dim == 0) throw DomainError("feature_dim must be positive");
  if (causal.causal_len == 0 || causal.interval == 0 || causal.layers == 0) {
    throw DomainError("causal_len, interval and layers must be positive");
  }
  if (head.mixtures == 0 || head.future_steps == 0 || head.latent_dim == 0) {
    throw DomainError("mixtures, future_steps and latent_dim must be positive");
  }
  if (head.act_dim < 2 || head.act_dim > 3) throw DomainError("act_dim must be 2 or 3");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw DomainError("dropout must lie in [0, 1)");
}

TrajectoryModel TrajectoryModel::create(tensor::ParameterStore& store, const ModelConfig& cfg,
                                        Rng& rng) {
  cfg.validate();
  TrajectoryModel m(cfg, causal::CausalEncoder::create(store, "causal", cfg.causal, rng),
                    head::VariationalHead::create(store, "head", cfg.head, rng));
  const std::size_t d = cfg.causal.d_model;
  if (cfg.input == FrameInput::kScene) {
    m.scene_ = scene::SceneEncoder::create(store, "scene", cfg.scene, rng);
  } else {
    m.features_ = tensor::Mlp::create(store, "frame", cfg.feature_dim, d, d, rng);
  }
  return m;
}

Var TrajectoryModel::encode_frames(Tape& tape, const Window& window,
                                   const tensor::DropoutContext* dropout) const {
  if (cfg_.input == FrameInput::kScene) {
    if (window.scenes.empty()) throw DimensionError("window has no scene frames");
    const auto frames = causal::select_history(window.scenes, cfg_.causal.causal_len, 1);
    std::vector<Var> rows;
    rows.reserve(frames.size());
    for (const auto& s : frames) rows.push_back(scene_->encode(tape, s, dropout));
    return tensor::concat_rows(rows);
  }
  if (window.features.empty()) throw DimensionError("window has no feature frames");
  const auto frames = causal::select_history(window.features, cfg_.causal.causal_len, 1);
  std::vector<double> flat;
  for (const auto& f : frames) {
    if (f.size() != cfg_.feature_dim) {
      throw DimensionError("feature frame width " + std::to_string(f.size()) + ", expected " +
                           std::to_string(cfg_.feature_dim));
    }
    flat.insert(flat.end(), f.begin(), f.end());
  }
  Var x = tape.constant(Tensor::matrix(frames.size(), cfg_.feature_dim, std::move(flat)));
  return (*features_)(tape, x);
}

head::HeadOutput TrajectoryModel::forward(Tape& tape, const Window& window, causal::Mode mode,
                                          Rng* rng, const tensor::DropoutContext* dropout) const {
  Var frames = encode_frames(tape, window, dropout);
  Var context = causal_.encode_context(tape, frames, mode, dropout);
  return head_.forward(tape, context, mode, rng);
}

head::GaussianMixtureTrajectory TrajectoryModel::predict(const tensor::ParameterStore& store,
                                                         const Window& window) const {
  Tape tape(store, Tape::Mode::kInference);
  const auto out = forward(tape, window, causal::Mode::kInfer, nullptr);
  auto gmm = head::to_mixture(out.mixture, cfg_.head.future_steps, cfg_.head.act_dim);
  for (double v : gmm.means) {
    if (!std::isfinite(v)) throw DomainError("model produced a non-finite mean");
  }
  return gmm;
}

}  // namespace trajmix::training
