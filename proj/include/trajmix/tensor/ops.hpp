#pragma once

#include <span>
#include <vector>

#include "trajmix/core/rng.hpp"
#include "trajmix/tensor/tape.hpp"

namespace trajmix::tensor {

// Elementwise, identical shapes.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(Var a, double s) { return scale(a, s); }
inline Var operator*(double s, Var a) { return scale(a, s); }

/// x (r x c) plus a length-c row vector broadcast over rows.
Var add_row(Var x, Var row);
/// x (r x c) times a length-c row vector broadcast over rows.
Var mul_row(Var x, Var row);
/// Adds a constant tensor of the same shape (attention masks, offsets).
Var add_constant(Var x, const Tensor& c);

/// (r x k) . (k x c)
Var matmul(Var a, Var b);
/// (r x k) . (c x k)^T
Var matmul_nt(Var a, Var b);

Var relu(Var x);
Var tanh(Var x);
Var sigmoid(Var x);
Var exp(Var x);
Var log(Var x);
Var abs(Var x);
Var square(Var x);
/// 1 / x elementwise.
Var reciprocal(Var x);
/// min(x, hi); the gradient passes where x <= hi.
Var clamp_max(Var x, double hi);
/// max(x, lo); the gradient passes where x >= lo.
Var clamp_min(Var x, double lo);
/// Value wrapped into (-pi, pi]; gradient passes through unchanged.
Var wrap_angle(Var x);

/// Sum of all entries, shape (1).
Var sum(Var x);
Var mean(Var x);
/// Sum of each row, shape (rows, 1).
Var sum_cols(Var x);

/// Row-wise normalization to zero mean and unit (biased) variance, no affine.
Var layer_norm_rows(Var x, double eps);
/// Row-wise softmax. Entries equal to -inf map to exactly 0; a row of only -inf throws.
Var softmax_rows(Var x);
Var log_softmax_rows(Var x);
/// Row-wise log-sum-exp, shape (rows, 1).
Var logsumexp_rows(Var x);

Var slice_rows(Var x, std::size_t begin, std::size_t count);
Var slice_cols(Var x, std::size_t begin, std::size_t count);
Var row(Var x, std::size_t r);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
/// Stacks `times` copies of x vertically.
Var tile_rows(Var x, std::size_t times);
Var reshape(Var x, Shape shape);

/// Mean over rows whose mask entry is true, shape (1, cols).
Var mean_rows_masked(Var x, const std::vector<bool>& mask);
/// Elementwise max over rows whose mask entry is true, shape (1, cols).
Var max_rows_masked(Var x, const std::vector<bool>& mask);

/// Inverted dropout; identity when p == 0.
Var dropout(Var x, double p, Rng& rng);
/// Forward value replaced by `replacement`, gradient passed to x unchanged.
Var straight_through(Var x, Tensor replacement);

}  // namespace trajmix::tensor
