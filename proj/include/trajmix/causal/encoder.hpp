#pragma once

#include <string>
#include <vector>

#include "trajmix/core/errors.hpp"
#include "trajmix/tensor/layers.hpp"

namespace trajmix::causal {

enum class Mode { kTrain, kInfer };

/// L x L mask with 0 where key <= query and -inf elsewhere. Throws DimensionError for L = 0.
tensor::AttentionMask build_causal_mask(std::size_t length);

/// Indices of the newest frame and every `interval`-th predecessor, at most `causal_len`
/// of them, oldest first.
std::vector<std::size_t> select_history_indices(std::size_t n_frames, std::size_t causal_len,
                                                std::size_t interval);

template <class T>
std::vector<T> select_history(const std::vector<T>& frames, std::size_t causal_len,
                              std::size_t interval) {
  std::vector<T> out;
  for (std::size_t i : select_history_indices(frames.size(), causal_len, interval))
    out.push_back(frames[i]);
  return out;
}

struct CausalEncoderConfig {
  std::size_t d_model = 128;
  std::size_t heads = 8;
  std::size_t layers = 6;
  std::size_t ffn_dim = 0;  // 0 selects 4 * d_model
  std::size_t causal_len = 15;
  std::size_t interval = 2;

  std::size_t ffn() const { return ffn_dim == 0 ? 4 * d_model : ffn_dim; }
};

/// Time-embedded, causally masked transformer over a window of scene embeddings.
class CausalEncoder {
 public:
  static CausalEncoder create(tensor::ParameterStore& store, const std::string& name,
                              const CausalEncoderConfig& cfg, Rng& rng);

  const CausalEncoderConfig& config() const { return cfg_; }

  struct Hidden {
    tensor::Var states;       // causal_len x d_model
    std::vector<bool> valid;  // false on left padding
  };
  /// Runs the encoder on n <= causal_len embeddings (n x d_model, oldest first). Short
  /// windows are left-padded with masked slots.
  Hidden hidden_states(tensor::Tape& tape, tensor::Var embeddings,
                       const tensor::DropoutContext* dropout = nullptr) const;

  /// Context vector o_t (1 x d_model): mean of valid hidden rows when training, newest row
  /// when inferring.
  tensor::Var encode_context(tensor::Tape& tape, tensor::Var embeddings, Mode mode,
                             const tensor::DropoutContext* dropout = nullptr) const;

 private:
  CausalEncoderConfig cfg_;
  tensor::Embedding time_;
  tensor::TransformerEncoder encoder_;
};

}  // namespace trajmix::causal
