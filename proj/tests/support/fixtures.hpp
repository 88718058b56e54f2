#pragma once

#include <cmath>
#include <vector>

#include "trajmix/core/rng.hpp"
#include "trajmix/scene/snapshot.hpp"
#include "trajmix/training/trainer.hpp"

namespace trajmix::fixtures {

inline scene::FeatureRows random_rows(std::size_t width, std::size_t n, Rng& rng,
                                      double span = 20.0) {
  scene::FeatureRows f(width);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(width);
    for (auto& v : row) v = rng.uniform(-1, 1);
    row[0] = rng.uniform(-span, span);
    row[1] = rng.uniform(-span, span);
    f.push_row(row, true);
  }
  return f;
}

inline scene::SceneSnapshot random_scene(Rng& rng, std::size_t agents, std::size_t lanes,
                                         std::size_t cross, std::size_t history = 12) {
  scene::SceneSnapshot s;
  s.ego_history = random_rows(scene::kAgentFeatures, history, rng, 3.0);
  for (std::size_t i = 0; i < agents; ++i) {
    s.agents.push_back(random_rows(scene::kAgentFeatures, history, rng));
  }
  for (std::size_t i = 0; i < lanes; ++i) s.lanes.push_back(random_rows(scene::kLaneFeatures, 5, rng));
  for (std::size_t i = 0; i < cross; ++i) {
    s.crosswalks.push_back(random_rows(scene::kCrossFeatures, 4, rng));
  }
  return s;
}

/// d_model 8, one layer everywhere, K = 2, T = 3.
inline training::ModelConfig toy_model_config(training::FrameInput input) {
  training::ModelConfig c;
  c.input = input;
  c.scene.d_model = 8;
  c.scene.heads = 2;
  c.scene.local_layers = 1;
  c.scene.global_layers = 1;
  c.scene.ego_history_frames = 4;
  c.scene.agent_history_frames = 4;
  c.feature_dim = 6;
  c.causal.d_model = 8;
  c.causal.heads = 2;
  c.causal.layers = 1;
  c.causal.causal_len = 3;
  c.causal.interval = 1;
  c.head.d_model = 8;
  c.head.mixtures = 2;
  c.head.future_steps = 3;
  c.head.latent_dim = 4;
  return c;
}

inline training::TrainingExample toy_example(const training::ModelConfig& cfg, Rng& rng,
                                             std::size_t frames = 3) {
  training::TrainingExample e;
  for (std::size_t f = 0; f < frames; ++f) {
    if (cfg.input == training::FrameInput::kScene) {
      e.window.scenes.push_back(random_scene(rng, 1, 1, 1, 4));
    } else {
      std::vector<double> row(cfg.feature_dim);
      for (auto& v : row) v = rng.normal();
      e.window.features.push_back(row);
    }
  }
  e.future.dt = 1.0;
  for (std::size_t t = 0; t < cfg.head.future_steps; ++t) {
    e.future.points.emplace_back(1.0 + t + rng.normal(0, 0.2), rng.normal(0, 0.3),
                                 rng.normal(0, 0.2));
  }
  e.start.vx = 1.0;
  return e;
}

}  // namespace trajmix::fixtures
