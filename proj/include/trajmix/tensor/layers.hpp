#pragma once

#include <string>
#include <vector>

#include "trajmix/core/rng.hpp"
#include "trajmix/tensor/ops.hpp"
#include "trajmix/tensor/parameters.hpp"
#include "trajmix/tensor/tape.hpp"

namespace trajmix::tensor {

/// Dropout settings for a forward pass; a null rng or p == 0 disables it.
struct DropoutContext {
  double p = 0.0;
  Rng* rng = nullptr;

  bool active() const { return rng != nullptr && p > 0.0; }
};

inline constexpr double kLayerNormEps = 1e-5;

/// x . W + b with x (n x in), W (in x out), b (1 x out).
Var linear(Var x, Var w, Var b);
Var linear(Var x, Var w);
/// Row-wise normalization followed by gain and shift.
Var layer_norm(Var x, Var gain, Var bias, double eps = kLayerNormEps);
Var softmax(Var x);

/// Additive L x L attention mask holding 0 and -inf.
///
/// Padded positions are hidden from every other query; a padded query attends only to
/// itself so every row keeps a finite entry on the diagonal.
class AttentionMask {
 public:
  static AttentionMask full(std::size_t length);
  static AttentionMask causal(std::size_t length);
  static AttentionMask full(const std::vector<bool>& valid);
  static AttentionMask causal(const std::vector<bool>& valid);

  std::size_t length() const { return length_; }
  const Tensor& additive() const { return values_; }
  double at(std::size_t query, std::size_t key) const { return values_.at(query, key); }
  bool blocked(std::size_t query, std::size_t key) const;

 private:
  AttentionMask(const std::vector<bool>& valid, bool causal);

  std::size_t length_ = 0;
  Tensor values_;
};

struct Linear {
  std::string name;
  std::size_t in = 0;
  std::size_t out = 0;
  bool bias = true;

  static Linear create(ParameterStore& store, const std::string& name, std::size_t in,
                       std::size_t out, Rng& rng, bool bias = true);
  Var operator()(Tape& tape, Var x) const;
};

struct LayerNorm {
  std::string name;
  std::size_t dim = 0;

  static LayerNorm create(ParameterStore& store, const std::string& name, std::size_t dim);
  Var operator()(Tape& tape, Var x) const;
};

/// linear -> layer norm -> ReLU -> linear.
struct Mlp {
  Linear first;
  LayerNorm norm;
  Linear second;

  static Mlp create(ParameterStore& store, const std::string& name, std::size_t in,
                    std::size_t hidden, std::size_t out, Rng& rng);
  Var operator()(Tape& tape, Var x) const;
};

/// ReLU(LayerNorm(x . W + b)) applied per row.
struct LinearWithNorm {
  Linear lin;
  LayerNorm norm;

  static LinearWithNorm create(ParameterStore& store, const std::string& name, std::size_t in,
                               std::size_t out, Rng& rng);
  Var operator()(Tape& tape, Var x) const;
};

/// Multi-head scaled dot-product self-attention without projection biases.
struct MultiHeadAttention {
  std::string name;
  std::size_t d_model = 0;
  std::size_t heads = 0;

  static MultiHeadAttention create(ParameterStore& store, const std::string& name,
                                   std::size_t d_model, std::size_t heads, Rng& rng);
  Var operator()(Tape& tape, Var seq, const AttentionMask& mask) const;
  /// Per-head attention weights (heads blocks of L x L stacked vertically).
  Var weights(Tape& tape, Var seq, const AttentionMask& mask) const;
};

/// Post-norm encoder layer: A = LN(X + MHSA(X)), out = LN(A + FFN(A)).
struct TransformerEncoderLayer {
  MultiHeadAttention attention;
  LayerNorm norm1;
  Linear ffn1;
  Linear ffn2;
  LayerNorm norm2;

  static TransformerEncoderLayer create(ParameterStore& store, const std::string& name,
                                        std::size_t d_model, std::size_t heads,
                                        std::size_t ffn_dim, Rng& rng);
  Var operator()(Tape& tape, Var seq, const AttentionMask& mask,
                 const DropoutContext* dropout = nullptr) const;
};

struct TransformerEncoder {
  std::vector<TransformerEncoderLayer> layers;

  static TransformerEncoder create(ParameterStore& store, const std::string& name,
                                   std::size_t n_layers, std::size_t d_model, std::size_t heads,
                                   std::size_t ffn_dim, Rng& rng);
  Var operator()(Tape& tape, Var seq, const AttentionMask& mask,
                 const DropoutContext* dropout = nullptr) const;
};

struct LstmState {
  Var h;
  Var c;
};

/// LSTM cell with gates ordered input, forget, candidate, output.
struct LstmCell {
  std::string name;
  std::size_t in = 0;
  std::size_t hidden = 0;

  static LstmCell create(ParameterStore& store, const std::string& name, std::size_t in,
                         std::size_t hidden, Rng& rng);
  LstmState zero_state(Tape& tape) const;
  LstmState operator()(Tape& tape, Var x, const LstmState& state) const;
};

/// Learnable lookup table of `count` rows.
struct Embedding {
  std::string name;
  std::size_t count = 0;
  std::size_t dim = 0;

  static Embedding create(ParameterStore& store, const std::string& name, std::size_t count,
                          std::size_t dim, Rng& rng);
  /// Rows [begin, begin + n) of the table.
  Var rows(Tape& tape, std::size_t begin, std::size_t n) const;
};

// Free-standing forms taking explicit parameter handles.
Var multi_head_attention(Var seq, const AttentionMask& mask, Var wq, Var wk, Var wv, Var wo,
                         std::size_t heads);
LstmState lstm_cell_step(Var x, const LstmState& state, Var w_ih, Var w_hh, Var b);

}  // namespace trajmix::tensor
