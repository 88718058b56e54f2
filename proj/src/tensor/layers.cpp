#include "trajmix/tensor/layers.hpp"

#include <cmath>
#include <limits>

#include "trajmix/core/errors.hpp"

namespace trajmix::tensor {

Var linear(Var x, Var w, Var b) { return add_row(matmul(x, w), b); }

Var linear(Var x, Var w) { return matmul(x, w); }

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  return add_row(mul_row(layer_norm_rows(x, eps), gain), bias);
}

Var softmax(Var x) { return softmax_rows(x); }

AttentionMask::AttentionMask(const std::vector<bool>& valid, bool causal)
    : length_(valid.size()), values_(Shape{valid.size() == 0 ? 1 : valid.size(),
                                           valid.size() == 0 ? 1 : valid.size()}) {
  if (valid.empty()) throw DimensionError("attention mask needs at least one position");
  const double ninf = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < length_; ++i)
    for (std::size_t j = 0; j < length_; ++j) {
      bool open = i == j || (valid[i] && valid[j] && (!causal || j <= i));
      values_.at(i, j) = open ? 0.0 : ninf;
    }
}

AttentionMask AttentionMask::full(std::size_t length) {
  return AttentionMask(std::vector<bool>(length, true), false);
}
AttentionMask AttentionMask::causal(std::size_t length) {
  return AttentionMask(std::vector<bool>(length, true), true);
}
AttentionMask AttentionMask::full(const std::vector<bool>& valid) {
  return AttentionMask(valid, false);
}
AttentionMask AttentionMask::causal(const std::vector<bool>& valid) {
  return AttentionMask(valid, true);
}

bool AttentionMask::blocked(std::size_t query, std::size_t key) const {
  return std::isinf(values_.at(query, key));
}

Linear Linear::create(ParameterStore& store, const std::string& name, std::size_t in,
                      std::size_t out, Rng& rng, bool bias) {
  store.add_uniform(name + ".weight", Shape{in, out}, in, rng);
  if (bias) store.add_constant(name + ".bias", Shape{1, out}, 0.0);
  return Linear{name, in, out, bias};
}

Var Linear::operator()(Tape& tape, Var x) const {
  if (x.cols() != in) {
    throw DimensionError(name + ": expected " + std::to_string(in) + " input features, got " +
                         std::to_string(x.cols()));
  }
  Var w = tape.parameter(name + ".weight");
  return bias ? linear(x, w, tape.parameter(name + ".bias")) : linear(x, w);
}

LayerNorm LayerNorm::create(ParameterStore& store, const std::string& name, std::size_t dim) {
  store.add_constant(name + ".gain", Shape{1, dim}, 1.0);
  store.add_constant(name + ".bias", Shape{1, dim}, 0.0);
  return LayerNorm{name, dim};
}

Var LayerNorm::operator()(Tape& tape, Var x) const {
  if (x.cols() != dim) throw DimensionError(name + ": width mismatch");
  return layer_norm(x, tape.parameter(name + ".gain"), tape.parameter(name + ".bias"));
}

Mlp Mlp::create(ParameterStore& store, const std::string& name, std::size_t in,
                std::size_t hidden, std::size_t out, Rng& rng) {
  Mlp m;
  m.first = Linear::create(store, name + ".fc1", in, hidden, rng);
  m.norm = LayerNorm::create(store, name + ".norm", hidden);
  m.second = Linear::create(store, name + ".fc2", hidden, out, rng);
  return m;
}

Var Mlp::operator()(Tape& tape, Var x) const {
  return second(tape, relu(norm(tape, first(tape, x))));
}

LinearWithNorm LinearWithNorm::create(ParameterStore& store, const std::string& name,
                                      std::size_t in, std::size_t out, Rng& rng) {
  LinearWithNorm m;
  m.lin = Linear::create(store, name + ".fc", in, out, rng);
  m.norm = LayerNorm::create(store, name + ".norm", out);
  return m;
}

Var LinearWithNorm::operator()(Tape& tape, Var x) const {
  return relu(norm(tape, lin(tape, x)));
}

namespace {

void check_attention_shapes(Var seq, const AttentionMask& mask, std::size_t d_model,
                            std::size_t heads) {
  if (heads == 0 || d_model % heads != 0) {
    throw DimensionError("d_model " + std::to_string(d_model) + " not divisible by " +
                         std::to_string(heads) + " heads");
  }
  if (seq.cols() != d_model) throw DimensionError("attention input width mismatch");
  if (mask.length() != seq.rows()) {
    throw DimensionError("attention mask of length " + std::to_string(mask.length()) +
                         " for sequence of " + std::to_string(seq.rows()));
  }
}

std::vector<Var> head_weights(Var q, Var k, const AttentionMask& mask, std::size_t heads) {
  const std::size_t dk = q.cols() / heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dk));
  std::vector<Var> out;
  out.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Var qh = heads == 1 ? q : slice_cols(q, h * dk, dk);
    Var kh = heads == 1 ? k : slice_cols(k, h * dk, dk);
    Var logits = add_constant(scale(matmul_nt(qh, kh), inv), mask.additive());
    out.push_back(softmax_rows(logits));
  }
  return out;
}

}  // namespace

Var multi_head_attention(Var seq, const AttentionMask& mask, Var wq, Var wk, Var wv, Var wo,
                         std::size_t heads) {
  const std::size_t d = wq.cols();
  check_attention_shapes(seq, mask, seq.cols(), heads);
  if (d % heads != 0) throw DimensionError("projection width not divisible by heads");
  Var q = matmul(seq, wq);
  Var k = matmul(seq, wk);
  Var v = matmul(seq, wv);
  const std::size_t dk = d / heads;
  std::vector<Var> weights = head_weights(q, k, mask, heads);
  std::vector<Var> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Var vh = heads == 1 ? v : slice_cols(v, h * dk, dk);
    outs.push_back(matmul(weights[h], vh));
  }
  Var joined = heads == 1 ? outs[0] : concat_cols(outs);
  return matmul(joined, wo);
}

MultiHeadAttention MultiHeadAttention::create(ParameterStore& store, const std::string& name,
                                              std::size_t d_model, std::size_t heads, Rng& rng) {
  if (heads == 0 || d_model % heads != 0) {
    throw DimensionError("d_model " + std::to_string(d_model) + " not divisible by " +
                         std::to_string(heads) + " heads");
  }
  for (const char* p : {".wq", ".wk", ".wv", ".wo"}) {
    store.add_uniform(name + p, Shape{d_model, d_model}, d_model, rng);
  }
  return MultiHeadAttention{name, d_model, heads};
}

Var MultiHeadAttention::operator()(Tape& tape, Var seq, const AttentionMask& mask) const {
  check_attention_shapes(seq, mask, d_model, heads);
  return multi_head_attention(seq, mask, tape.parameter(name + ".wq"),
                              tape.parameter(name + ".wk"), tape.parameter(name + ".wv"),
                              tape.parameter(name + ".wo"), heads);
}

Var MultiHeadAttention::weights(Tape& tape, Var seq, const AttentionMask& mask) const {
  check_attention_shapes(seq, mask, d_model, heads);
  Var q = matmul(seq, tape.parameter(name + ".wq"));
  Var k = matmul(seq, tape.parameter(name + ".wk"));
  std::vector<Var> w = head_weights(q, k, mask, heads);
  return heads == 1 ? w[0] : concat_rows(w);
}

TransformerEncoderLayer TransformerEncoderLayer::create(ParameterStore& store,
                                                        const std::string& name,
                                                        std::size_t d_model, std::size_t heads,
                                                        std::size_t ffn_dim, Rng& rng) {
  TransformerEncoderLayer l;
  l.attention = MultiHeadAttention::create(store, name + ".attn", d_model, heads, rng);
  l.norm1 = LayerNorm::create(store, name + ".norm1", d_model);
  l.ffn1 = Linear::create(store, name + ".ffn1", d_model, ffn_dim, rng);
  l.ffn2 = Linear::create(store, name + ".ffn2", ffn_dim, d_model, rng);
  l.norm2 = LayerNorm::create(store, name + ".norm2", d_model);
  return l;
}

Var TransformerEncoderLayer::operator()(Tape& tape, Var seq, const AttentionMask& mask,
                                        const DropoutContext* dropout_ctx) const {
  Var att = attention(tape, seq, mask);
  if (dropout_ctx && dropout_ctx->active()) att = dropout(att, dropout_ctx->p, *dropout_ctx->rng);
  Var a = norm1(tape, add(seq, att));
  Var f = ffn2(tape, relu(ffn1(tape, a)));
  if (dropout_ctx && dropout_ctx->active()) f = dropout(f, dropout_ctx->p, *dropout_ctx->rng);
  return norm2(tape, add(a, f));
}

TransformerEncoder TransformerEncoder::create(ParameterStore& store, const std::string& name,
                                              std::size_t n_layers, std::size_t d_model,
                                              std::size_t heads, std::size_t ffn_dim, Rng& rng) {
  TransformerEncoder enc;
  for (std::size_t i = 0; i < n_layers; ++i) {
    enc.layers.push_back(TransformerEncoderLayer::create(
        store, name + ".layer" + std::to_string(i), d_model, heads, ffn_dim, rng));
  }
  return enc;
}

Var TransformerEncoder::operator()(Tape& tape, Var seq, const AttentionMask& mask,
                                   const DropoutContext* dropout_ctx) const {
  for (const auto& layer : layers) seq = layer(tape, seq, mask, dropout_ctx);
  return seq;
}

LstmState lstm_cell_step(Var x, const LstmState& state, Var w_ih, Var w_hh, Var b) {
  const std::size_t hidden = state.h.cols();
  if (w_ih.cols() != 4 * hidden || w_hh.cols() != 4 * hidden || w_hh.rows() != hidden ||
      b.size() != 4 * hidden || x.cols() != w_ih.rows() || state.c.cols() != hidden) {
    throw DimensionError("lstm_cell_step: inconsistent shapes");
  }
  Var z = add_row(add(matmul(x, w_ih), matmul(state.h, w_hh)), b);
  Var i = sigmoid(slice_cols(z, 0, hidden));
  Var f = sigmoid(slice_cols(z, hidden, hidden));
  Var g = tanh(slice_cols(z, 2 * hidden, hidden));
  Var o = sigmoid(slice_cols(z, 3 * hidden, hidden));
  Var c = add(mul(f, state.c), mul(i, g));
  Var h = mul(o, tanh(c));
  return {h, c};
}

LstmCell LstmCell::create(ParameterStore& store, const std::string& name, std::size_t in,
                          std::size_t hidden, Rng& rng) {
  store.add_uniform(name + ".w_ih", Shape{in, 4 * hidden}, hidden, rng);
  store.add_uniform(name + ".w_hh", Shape{hidden, 4 * hidden}, hidden, rng);
  store.add_constant(name + ".bias", Shape{1, 4 * hidden}, 0.0);
  return LstmCell{name, in, hidden};
}

LstmState LstmCell::zero_state(Tape& tape) const {
  return {tape.constant(Tensor(Shape{1, hidden}, 0.0)), tape.constant(Tensor(Shape{1, hidden}, 0.0))};
}

LstmState LstmCell::operator()(Tape& tape, Var x, const LstmState& state) const {
  return lstm_cell_step(x, state, tape.parameter(name + ".w_ih"), tape.parameter(name + ".w_hh"),
                        tape.parameter(name + ".bias"));
}

Embedding Embedding::create(ParameterStore& store, const std::string& name, std::size_t count,
                            std::size_t dim, Rng& rng) {
  store.add_uniform(name + ".table", Shape{count, dim}, dim, rng);
  return Embedding{name, count, dim};
}

Var Embedding::rows(Tape& tape, std::size_t begin, std::size_t n) const {
  if (n == 0 || begin + n > count) {
    throw DimensionError(name + ": rows [" + std::to_string(begin) + ", " +
                         std::to_string(begin + n) + ") outside table of " + std::to_string(count));
  }
  return slice_rows(tape.parameter(name + ".table"), begin, n);
}

}  // namespace trajmix::tensor
