#include "trajmix/scene/encoder.hpp"

#include "trajmix/core/errors.hpp"

namespace trajmix::scene {

using tensor::Shape;
using tensor::Tape;
using tensor::Tensor;
using tensor::Var;

SceneEncoder SceneEncoder::create(tensor::ParameterStore& store, const std::string& name,
                                  const SceneEncoderConfig& cfg, Rng& rng) {
  SceneEncoder e;
  e.cfg_ = cfg;
  const std::size_t d = cfg.d_model;
  e.ego_mlp_ = tensor::Mlp::create(store, name + ".ego_mlp", cfg.ego_history_frames * kAgentFeatures,
                                   d, d, rng);
  e.agent_mlp_ = tensor::Mlp::create(store, name + ".agent_mlp",
                                     cfg.agent_history_frames * kAgentFeatures, d, d, rng);
  e.lane_embed_ = tensor::LinearWithNorm::create(store, name + ".lane_embed", kLaneFeatures, d, rng);
  e.cross_embed_ =
      tensor::LinearWithNorm::create(store, name + ".cross_embed", kCrossFeatures, d, rng);
  e.map_encoder_ = tensor::TransformerEncoder::create(store, name + ".map", cfg.local_layers, d,
                                                      cfg.heads, cfg.ffn(), rng);
  e.global_encoder_ = tensor::TransformerEncoder::create(store, name + ".global", cfg.global_layers,
                                                         d, cfg.heads, cfg.ffn(), rng);
  return e;
}

Tensor flatten_history(const FeatureRows& history, std::size_t frames) {
  if (history.width != kAgentFeatures) throw DimensionError("history rows must have 7 features");
  Tensor out(Shape{1, frames * kAgentFeatures}, 0.0);
  const std::size_t n = history.rows();
  const std::size_t take = std::min(n, frames);
  for (std::size_t k = 0; k < take; ++k) {
    const std::size_t src = n - take + k;
    const std::size_t dst = frames - take + k;
    if (!history.mask[src]) continue;
    for (std::size_t c = 0; c < kAgentFeatures; ++c) out[dst * kAgentFeatures + c] = history.at(src, c);
  }
  return out;
}

Var SceneEncoder::embed_map_points(Tape& tape, const FeatureRows& points) const {
  if (points.rows() == 0) throw DimensionError("polyline without points");
  Tensor values(Shape{points.rows(), points.width}, points.values);
  // Invalid points are zeroed so that non-finite filler cannot leak through 0 * inf.
  for (std::size_t r = 0; r < points.rows(); ++r)
    if (!points.mask[r])
      for (std::size_t c = 0; c < points.width; ++c) values.at(r, c) = 0.0;
  Var x = tape.constant(std::move(values));
  if (points.width == kLaneFeatures) return lane_embed_(tape, x);
  if (points.width == kCrossFeatures) return cross_embed_(tape, x);
  throw DimensionError("map points must have 10 or 5 features, got " + std::to_string(points.width));
}

Var SceneEncoder::encode_polyline(Tape& tape, Var embedded, const std::vector<bool>& mask,
                                  const tensor::DropoutContext* dropout) const {
  if (mask.size() != embedded.rows()) throw DimensionError("polyline mask length mismatch");
  bool any = false;
  for (bool b : mask) any = any || b;
  if (!any) throw DomainError("empty polyline: no valid points");
  Var enc = map_encoder_(tape, embedded, tensor::AttentionMask::full(mask), dropout);
  return tensor::max_rows_masked(enc, mask);
}

SceneEncoder::AgentEmbeddings SceneEncoder::encode_agents(Tape& tape, const SceneSnapshot& s) const {
  AgentEmbeddings out;
  out.ego = ego_mlp_(tape, tape.constant(flatten_history(s.ego_history, cfg_.ego_history_frames)));
  for (const auto& a : s.agents) {
    if (!a.any_valid()) {
      out.agents.emplace_back();
      continue;
    }
    out.agents.push_back(
        agent_mlp_(tape, tape.constant(flatten_history(a, cfg_.agent_history_frames))));
  }
  return out;
}

Var SceneEncoder::encode(Tape& tape, const SceneSnapshot& raw,
                         const tensor::DropoutContext* dropout) const {
  raw.validate();
  const SceneSnapshot s = apply_entity_caps(raw, cfg_.caps);
  AgentEmbeddings ae = encode_agents(tape, s);

  std::vector<Var> tokens{ae.ego};
  std::vector<bool> valid{true};
  Var zero = tape.constant(Tensor(Shape{1, cfg_.d_model}, 0.0));
  for (const auto& a : ae.agents) {
    tokens.push_back(a.valid() ? a : zero);
    valid.push_back(a.valid());
  }
  auto add_polylines = [&](const std::vector<FeatureRows>& polys) {
    for (const auto& p : polys) {
      if (!p.any_valid()) {
        tokens.push_back(zero);
        valid.push_back(false);
        continue;
      }
      tokens.push_back(encode_polyline(tape, embed_map_points(tape, p), p.mask, dropout));
      valid.push_back(true);
    }
  };
  add_polylines(s.lanes);
  add_polylines(s.crosswalks);

  Var seq = tokens.size() == 1 ? tokens[0] : tensor::concat_rows(tokens);
  Var out = global_encoder_(tape, seq, tensor::AttentionMask::full(valid), dropout);
  return tensor::row(out, 0);
}

}  // namespace trajmix::scene
