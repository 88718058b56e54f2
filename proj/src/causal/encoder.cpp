#include "trajmix/causal/encoder.hpp"

#include <algorithm>

namespace trajmix::causal {

using tensor::Shape;
using tensor::Tape;
using tensor::Tensor;
using tensor::Var;

tensor::AttentionMask build_causal_mask(std::size_t length) {
  if (length == 0) throw DimensionError("causal mask length must be at least 1");
  return tensor::AttentionMask::causal(length);
}

std::vector<std::size_t> select_history_indices(std::size_t n_frames, std::size_t causal_len,
                                                std::size_t interval) {
  if (interval == 0) throw DomainError("history interval must be at least 1");
  std::vector<std::size_t> idx;
  if (n_frames == 0 || causal_len == 0) return idx;
  for (std::size_t k = 0; k < causal_len; ++k) {
    const std::size_t back = k * interval;
    if (back >= n_frames) break;
    idx.push_back(n_frames - 1 - back);
  }
  std::reverse(idx.begin(), idx.end());
  return idx;
}

CausalEncoder CausalEncoder::create(tensor::ParameterStore& store, const std::string& name,
                                    const CausalEncoderConfig& cfg, Rng& rng) {
  if (cfg.causal_len == 0) throw DomainError("causal_len must be at least 1");
  CausalEncoder e;
  e.cfg_ = cfg;
  e.time_ = tensor::Embedding::create(store, name + ".time", cfg.causal_len, cfg.d_model, rng);
  e.encoder_ = tensor::TransformerEncoder::create(store, name + ".encoder", cfg.layers, cfg.d_model,
                                                  cfg.heads, cfg.ffn(), rng);
  return e;
}

CausalEncoder::Hidden CausalEncoder::hidden_states(Tape& tape, Var embeddings,
                                                   const tensor::DropoutContext* dropout) const {
  const std::size_t n = embeddings.rows();
  const std::size_t len = cfg_.causal_len;
  if (embeddings.cols() != cfg_.d_model) throw DimensionError("embedding width mismatch");
  if (n > len) {
    throw DimensionError("window of " + std::to_string(n) + " exceeds causal_len " +
                         std::to_string(len));
  }
  Var seq = embeddings;
  std::vector<bool> valid(len, true);
  if (n < len) {
    std::fill(valid.begin(), valid.begin() + static_cast<std::ptrdiff_t>(len - n), false);
    std::vector<Var> parts{tape.constant(Tensor(Shape{len - n, cfg_.d_model}, 0.0)), embeddings};
    seq = tensor::concat_rows(parts);
  }
  seq = tensor::add(seq, time_.rows(tape, 0, len));
  Var h = encoder_(tape, seq, tensor::AttentionMask::causal(valid), dropout);
  return {h, valid};
}

Var CausalEncoder::encode_context(Tape& tape, Var embeddings, Mode mode,
                                  const tensor::DropoutContext* dropout) const {
  Hidden h = hidden_states(tape, embeddings, dropout);
  if (mode == Mode::kInfer) return tensor::row(h.states, cfg_.causal_len - 1);
  return tensor::mean_rows_masked(h.states, h.valid);
}

}  // namespace trajmix::causal
