#pragma once

#include <string>
#include <vector>

#include "trajmix/scene/snapshot.hpp"
#include "trajmix/tensor/layers.hpp"

namespace trajmix::scene {

struct SceneEncoderConfig {
  std::size_t d_model = 128;
  std::size_t heads = 8;
  std::size_t local_layers = 6;
  std::size_t global_layers = 6;
  std::size_t ffn_dim = 0;  // 0 selects 4 * d_model
  std::size_t ego_history_frames = 12;
  std::size_t agent_history_frames = 12;
  EntityCaps caps;

  std::size_t ffn() const { return ffn_dim == 0 ? 4 * d_model : ffn_dim; }
};

/// Hierarchical scene encoder: per-entity embeddings, a shared local transformer over map
/// polylines with max pooling, and a global transformer over entity tokens.
class SceneEncoder {
 public:
  static SceneEncoder create(tensor::ParameterStore& store, const std::string& name,
                             const SceneEncoderConfig& cfg, Rng& rng);

  const SceneEncoderConfig& config() const { return cfg_; }

  /// ReLU(LayerNorm(W p + b)) for each of the P points; F must be 10 or 5.
  tensor::Var embed_map_points(tensor::Tape& tape, const FeatureRows& points) const;
  /// Local transformer over the embedded points followed by a max over valid points.
  tensor::Var encode_polyline(tensor::Tape& tape, tensor::Var embedded,
                              const std::vector<bool>& mask,
                              const tensor::DropoutContext* dropout = nullptr) const;

  struct AgentEmbeddings {
    tensor::Var ego;
    std::vector<tensor::Var> agents;  // empty handle for agents without valid frames
  };
  AgentEmbeddings encode_agents(tensor::Tape& tape, const SceneSnapshot& s) const;

  /// Scene embedding s_t, shape (1, d_model): global encoder output at the ego token.
  tensor::Var encode(tensor::Tape& tape, const SceneSnapshot& s,
                     const tensor::DropoutContext* dropout = nullptr) const;

 private:
  SceneEncoderConfig cfg_;
  tensor::Mlp ego_mlp_;
  tensor::Mlp agent_mlp_;
  tensor::LinearWithNorm lane_embed_;
  tensor::LinearWithNorm cross_embed_;
  tensor::TransformerEncoder map_encoder_;
  tensor::TransformerEncoder global_encoder_;
};

/// Flattens a T x 7 history into one row, zeroing invalid frames. Histories shorter than
/// `frames` are left-padded with zeros; longer ones keep the newest frames.
tensor::Tensor flatten_history(const FeatureRows& history, std::size_t frames);

}  // namespace trajmix::scene
