#include "trajmix/tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "trajmix/core/errors.hpp"
#include "trajmix/core/geometry.hpp"

namespace trajmix::tensor {

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

Shape matrix_shape(std::size_t rows, std::size_t cols) { return Shape{rows, cols}; }

// Elementwise map with derivative d(x, y) evaluated from input and output.
template <class F, class D>
Var unary(Var x, F f, D d) {
  Tensor out(x.shape());
  const Tensor& xv = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  const std::size_t xi = x.id();
  return x.tape().record(std::move(out), {x}, [xi, d](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& xv = t.value(xi);
    const Tensor& yv = t.value(self);
    Tensor& gx = t.grad_buffer(xi);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * d(xv[i], yv[i]);
  });
}

void add_into_if(Tape& t, std::size_t id, const Tensor& g, double s = 1.0) {
  if (!t.requires_grad(id)) return;
  Tensor& gx = t.grad_buffer(id);
  for (std::size_t i = 0; i < g.size(); ++i) gx[i] += s * g[i];
}

}  // namespace

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape().record(std::move(out), {a, b}, [ai, bi](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    add_into_if(t, ai, g);
    add_into_if(t, bi, g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape().record(std::move(out), {a, b}, [ai, bi](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    add_into_if(t, ai, g);
    add_into_if(t, bi, g, -1.0);
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape().record(std::move(out), {a, b}, [ai, bi](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& av = t.value(ai);
    const Tensor& bv = t.value(bi);
    if (t.requires_grad(ai)) {
      Tensor& ga = t.grad_buffer(ai);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(bi)) {
      Tensor& gb = t.grad_buffer(bi);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double s) {
  Tensor out = a.value();
  for (auto& v : out.values()) v *= s;
  const std::size_t ai = a.id();
  return a.tape().record(std::move(out), {a}, [ai, s](Tape& t, std::size_t self) {
    add_into_if(t, ai, t.grad(self), s);
  });
}

Var add_scalar(Var a, double s) {
  Tensor out = a.value();
  for (auto& v : out.values()) v += s;
  const std::size_t ai = a.id();
  return a.tape().record(std::move(out), {a}, [ai](Tape& t, std::size_t self) {
    add_into_if(t, ai, t.grad(self));
  });
}

Var add_row(Var x, Var r) {
  const std::size_t cols = x.cols();
  if (r.size() != cols) {
    throw DimensionError("add_row: row of " + std::to_string(r.size()) + " for " +
                         std::to_string(cols) + " columns");
  }
  Tensor out = x.value();
  const Tensor& rv = r.value();
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] += rv[j];
  const std::size_t xi = x.id(), ri = r.id();
  return x.tape().record(std::move(out), {x, r}, [xi, ri, cols](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    add_into_if(t, xi, g);
    if (t.requires_grad(ri)) {
      Tensor& gr = t.grad_buffer(ri);
      for (std::size_t i = 0; i < g.size(); ++i) gr[i % cols] += g[i];
    }
  });
}

Var mul_row(Var x, Var r) {
  const std::size_t cols = x.cols();
  if (r.size() != cols) throw DimensionError("mul_row: width mismatch");
  Tensor out = x.value();
  const Tensor& rv = r.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= rv[i % cols];
  const std::size_t xi = x.id(), ri = r.id();
  return x.tape().record(std::move(out), {x, r}, [xi, ri, cols](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& xv = t.value(xi);
    const Tensor& rv = t.value(ri);
    if (t.requires_grad(xi)) {
      Tensor& gx = t.grad_buffer(xi);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * rv[i % cols];
    }
    if (t.requires_grad(ri)) {
      Tensor& gr = t.grad_buffer(ri);
      for (std::size_t i = 0; i < g.size(); ++i) gr[i % cols] += g[i] * xv[i];
    }
  });
}

Var add_constant(Var x, const Tensor& c) {
  if (c.size() != x.size()) throw DimensionError("add_constant: size mismatch");
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += c[i];
  const std::size_t xi = x.id();
  return x.tape().record(std::move(out), {x}, [xi](Tape& t, std::size_t self) {
    add_into_if(t, xi, t.grad(self));
  });
}

Var matmul(Var a, Var b) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: " + shape_string(a.shape()) + " . " + shape_string(b.shape()));
  }
  Tensor out(matrix_shape(n, m), 0.0);
  const double* av = a.value().data();
  const double* bv = b.value().data();
  double* o = out.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double s = av[i * k + p];
      const double* brow = bv + p * m;
      double* orow = o + i * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += s * brow[j];
    }
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape().record(std::move(out), {a, b}, [ai, bi, n, k, m](Tape& t, std::size_t self) {
    const double* g = t.grad(self).data();
    const double* av = t.value(ai).data();
    const double* bv = t.value(bi).data();
    if (t.requires_grad(ai)) {
      double* ga = t.grad_buffer(ai).data();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < m; ++j) acc += g[i * m + j] * bv[p * m + j];
          ga[i * k + p] += acc;
        }
    }
    if (t.requires_grad(bi)) {
      double* gb = t.grad_buffer(bi).data();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double s = av[i * k + p];
          for (std::size_t j = 0; j < m; ++j) gb[p * m + j] += s * g[i * m + j];
        }
    }
  });
}

Var matmul_nt(Var a, Var b) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  if (b.cols() != k) {
    throw DimensionError("matmul_nt: " + shape_string(a.shape()) + " . " +
                         shape_string(b.shape()) + "^T");
  }
  Tensor out(matrix_shape(n, m), 0.0);
  const double* av = a.value().data();
  const double* bv = b.value().data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += av[i * k + p] * bv[j * k + p];
      out[i * m + j] = acc;
    }
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape().record(std::move(out), {a, b}, [ai, bi, n, k, m](Tape& t, std::size_t self) {
    const double* g = t.grad(self).data();
    const double* av = t.value(ai).data();
    const double* bv = t.value(bi).data();
    if (t.requires_grad(ai)) {
      double* ga = t.grad_buffer(ai).data();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
          const double s = g[i * m + j];
          for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += s * bv[j * k + p];
        }
    }
    if (t.requires_grad(bi)) {
      double* gb = t.grad_buffer(bi).data();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
          const double s = g[i * m + j];
          for (std::size_t p = 0; p < k; ++p) gb[j * k + p] += s * av[i * k + p];
        }
    }
  });
}

Var relu(Var x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var tanh(Var x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var x) {
  return unary(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var exp(Var x) {
  return unary(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var log(Var x) {
  return unary(
      x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Var abs(Var x) {
  return unary(
      x, [](double v) { return std::abs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Var square(Var x) {
  return unary(
      x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Var reciprocal(Var x) {
  return unary(
      x, [](double v) { return 1.0 / v; }, [](double, double y) { return -y * y; });
}

Var clamp_min(Var x, double lo) {
  return unary(
      x, [lo](double v) { return v < lo ? lo : v; },
      [lo](double v, double) { return v >= lo ? 1.0 : 0.0; });
}

Var clamp_max(Var x, double hi) {
  return unary(
      x, [hi](double v) { return v > hi ? hi : v; },
      [hi](double v, double) { return v <= hi ? 1.0 : 0.0; });
}

Var wrap_angle(Var x) {
  return unary(
      x, [](double v) { return trajmix::wrap_angle(v); }, [](double, double) { return 1.0; });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  const std::size_t xi = x.id();
  return x.tape().record(Tensor::scalar(s), {x}, [xi](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    Tensor& gx = t.grad_buffer(xi);
    for (auto& v : gx.values()) v += g;
  });
}

Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Var sum_cols(Var x) {
  const std::size_t rows = x.rows(), cols = x.cols();
  const Tensor& xv = x.value();
  Tensor out(matrix_shape(rows, 1), 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r] += xv[r * cols + c];
  const std::size_t xi = x.id();
  return x.tape().record(std::move(out), {x}, [xi, rows, cols](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad_buffer(xi);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += g[r];
  });
}

Var layer_norm_rows(Var x, double eps) {
  const std::size_t rows = x.rows(), cols = x.cols();
  if (cols < 2) throw DimensionError("layer_norm needs at least two features per row");
  const Tensor& xv = x.value();
  Tensor out(x.shape());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * cols;
    double mu = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mu += xr[c];
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) var += (xr[c] - mu) * (xr[c] - mu);
    var /= static_cast<double>(cols);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = (xr[c] - mu) * inv_std[r];
  }
  const std::size_t xi = x.id();
  return x.tape().record(
      std::move(out), {x}, [xi, rows, cols, inv_std = std::move(inv_std)](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& y = t.value(self);
        Tensor& gx = t.grad_buffer(xi);
        const double n = static_cast<double>(cols);
        for (std::size_t r = 0; r < rows; ++r) {
          double mean_g = 0.0, mean_gy = 0.0;
          for (std::size_t c = 0; c < cols; ++c) {
            mean_g += g[r * cols + c];
            mean_gy += g[r * cols + c] * y[r * cols + c];
          }
          mean_g /= n;
          mean_gy /= n;
          for (std::size_t c = 0; c < cols; ++c) {
            const std::size_t i = r * cols + c;
            gx[i] += inv_std[r] * (g[i] - mean_g - y[i] * mean_gy);
          }
        }
      });
}

namespace {
double row_max(const double* row, std::size_t cols) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < cols; ++c) m = std::max(m, row[c]);
  if (m == -std::numeric_limits<double>::infinity()) {
    throw DomainError("softmax row has no finite entry");
  }
  return m;
}
}  // namespace

Var softmax_rows(Var x) {
  const std::size_t rows = x.rows(), cols = x.cols();
  const Tensor& xv = x.value();
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * cols;
    double* yr = out.data() + r * cols;
    const double m = row_max(xr, cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      yr[c] = std::exp(xr[c] - m);
      z += yr[c];
    }
    for (std::size_t c = 0; c < cols; ++c) yr[c] /= z;
  }
  const std::size_t xi = x.id();
  return x.tape().record(std::move(out), {x}, [xi, rows, cols](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& gx = t.grad_buffer(xi);
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += g[r * cols + c] * y[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c) {
        const std::size_t i = r * cols + c;
        gx[i] += y[i] * (g[i] - dot);
      }
    }
  });
}

Var log_softmax_rows(Var x) {
  const std::size_t rows = x.rows(), cols = x.cols();
  const Tensor& xv = x.value();
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * cols;
    const double m = row_max(xr, cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += std::exp(xr[c] - m);
    const double lz = m + std::log(z);
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = xr[c] - lz;
  }
  const std::size_t xi = x.id();
  return x.tape().record(std::move(out), {x}, [xi, rows, cols](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& gx = t.grad_buffer(xi);
    for (std::size_t r = 0; r < rows; ++r) {
      double gs = 0.0;
      for (std::size_t c = 0; c < cols; ++c) gs += g[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c) {
        const std::size_t i = r * cols + c;
        gx[i] += g[i] - std::exp(y[i]) * gs;
      }
    }
  });
}

Var logsumexp_rows(Var x) {
  const std::size_t rows = x.rows(), cols = x.cols();
  const Tensor& xv = x.value();
  Tensor out(matrix_shape(rows, 1));
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * cols;
    const double m = row_max(xr, cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += std::exp(xr[c] - m);
    out[r] = m + std::log(z);
  }
  const std::size_t xi = x.id();
  return x.tape().record(std::move(out), {x}, [xi, rows, cols](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    const Tensor& xv = t.value(xi);
    Tensor& gx = t.grad_buffer(xi);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) {
        const std::size_t i = r * cols + c;
        gx[i] += g[r] * std::exp(xv[i] - y[r]);
      }
  });
}

Var slice_rows(Var x, std::size_t begin, std::size_t count) {
  const std::size_t rows = x.rows(), cols = x.cols();
  if (count == 0 || begin + count > rows) throw DimensionError("slice_rows out of range");
  const Tensor& xv = x.value();
  std::vector<double> v(xv.data() + begin * cols, xv.data() + (begin + count) * cols);
  const std::size_t xi = x.id();
  return x.tape().record(Tensor(matrix_shape(count, cols), std::move(v)), {x},
                         [xi, begin, cols](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           Tensor& gx = t.grad_buffer(xi);
                           for (std::size_t i = 0; i < g.size(); ++i) gx[begin * cols + i] += g[i];
                         });
}

Var slice_cols(Var x, std::size_t begin, std::size_t count) {
  const std::size_t rows = x.rows(), cols = x.cols();
  if (count == 0 || begin + count > cols) throw DimensionError("slice_cols out of range");
  const Tensor& xv = x.value();
  Tensor out(matrix_shape(rows, count));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < count; ++c) out[r * count + c] = xv[r * cols + begin + c];
  const std::size_t xi = x.id();
  return x.tape().record(std::move(out), {x},
                         [xi, rows, cols, begin, count](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           Tensor& gx = t.grad_buffer(xi);
                           for (std::size_t r = 0; r < rows; ++r)
                             for (std::size_t c = 0; c < count; ++c)
                               gx[r * cols + begin + c] += g[r * count + c];
                         });
}

Var row(Var x, std::size_t r) { return slice_rows(x, r, 1); }

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows of nothing");
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw DimensionError("concat_rows: column mismatch");
    rows += p.rows();
  }
  std::vector<double> v;
  v.reserve(rows * cols);
  std::vector<std::size_t> ids, offsets;
  for (const auto& p : parts) {
    offsets.push_back(v.size());
    ids.push_back(p.id());
    const auto vals = p.value().values();
    v.insert(v.end(), vals.begin(), vals.end());
  }
  return parts[0].tape().record(
      Tensor(matrix_shape(rows, cols), std::move(v)), parts,
      [ids = std::move(ids), offsets = std::move(offsets)](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (!t.requires_grad(ids[k])) continue;
          Tensor& gp = t.grad_buffer(ids[k]);
          for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offsets[k] + i];
        }
      });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols of nothing");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  std::vector<std::size_t> ids, widths, offsets;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw DimensionError("concat_cols: row mismatch");
    offsets.push_back(cols);
    widths.push_back(p.cols());
    ids.push_back(p.id());
    cols += p.cols();
  }
  Tensor out(matrix_shape(rows, cols));
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& pv = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < widths[k]; ++c)
        out[r * cols + offsets[k] + c] = pv[r * widths[k] + c];
  }
  return parts[0].tape().record(
      std::move(out), parts,
      [ids = std::move(ids), widths = std::move(widths), offsets = std::move(offsets), rows,
       cols](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (!t.requires_grad(ids[k])) continue;
          Tensor& gp = t.grad_buffer(ids[k]);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < widths[k]; ++c)
              gp[r * widths[k] + c] += g[r * cols + offsets[k] + c];
        }
      });
}

Var tile_rows(Var x, std::size_t times) {
  if (times == 0) throw DimensionError("tile_rows needs at least one copy");
  const Tensor& xv = x.value();
  const std::size_t n = xv.size();
  std::vector<double> v;
  v.reserve(n * times);
  for (std::size_t k = 0; k < times; ++k) v.insert(v.end(), xv.values().begin(), xv.values().end());
  const std::size_t xi = x.id();
  return x.tape().record(Tensor(matrix_shape(x.rows() * times, x.cols()), std::move(v)), {x},
                         [xi, n](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           Tensor& gx = t.grad_buffer(xi);
                           for (std::size_t i = 0; i < g.size(); ++i) gx[i % n] += g[i];
                         });
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  const std::size_t xi = x.id();
  return x.tape().record(std::move(out), {x}, [xi](Tape& t, std::size_t self) {
    add_into_if(t, xi, t.grad(self));
  });
}

Var mean_rows_masked(Var x, const std::vector<bool>& mask) {
  const std::size_t rows = x.rows(), cols = x.cols();
  if (mask.size() != rows) throw DimensionError("mean_rows_masked: mask length mismatch");
  const auto valid = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
  if (valid == 0) throw DomainError("mean_rows_masked: no valid rows");
  const Tensor& xv = x.value();
  Tensor out(matrix_shape(1, cols), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!mask[r]) continue;
    for (std::size_t c = 0; c < cols; ++c) out[c] += xv[r * cols + c];
  }
  const double inv = 1.0 / static_cast<double>(valid);
  for (auto& v : out.values()) v *= inv;
  const std::size_t xi = x.id();
  return x.tape().record(std::move(out), {x}, [xi, mask, rows, cols, inv](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad_buffer(xi);
    for (std::size_t r = 0; r < rows; ++r) {
      if (!mask[r]) continue;
      for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += g[c] * inv;
    }
  });
}

Var max_rows_masked(Var x, const std::vector<bool>& mask) {
  const std::size_t rows = x.rows(), cols = x.cols();
  if (mask.size() != rows) throw DimensionError("max_rows_masked: mask length mismatch");
  const Tensor& xv = x.value();
  Tensor out(matrix_shape(1, cols), -std::numeric_limits<double>::infinity());
  std::vector<std::size_t> argmax(cols, rows);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!mask[r]) continue;
    for (std::size_t c = 0; c < cols; ++c) {
      if (argmax[c] == rows || xv[r * cols + c] > out[c]) {
        out[c] = xv[r * cols + c];
        argmax[c] = r;
      }
    }
  }
  if (argmax[0] == rows) throw DomainError("max_rows_masked: no valid rows");
  const std::size_t xi = x.id();
  return x.tape().record(std::move(out), {x},
                         [xi, cols, argmax = std::move(argmax)](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           Tensor& gx = t.grad_buffer(xi);
                           for (std::size_t c = 0; c < cols; ++c) gx[argmax[c] * cols + c] += g[c];
                         });
}

Var dropout(Var x, double p, Rng& rng) {
  if (p <= 0.0) return x;
  if (p >= 1.0) throw DomainError("dropout probability must be below 1");
  const double keep_scale = 1.0 / (1.0 - p);
  Tensor mask(x.shape());
  for (auto& m : mask.values()) m = rng.uniform() < p ? 0.0 : keep_scale;
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  const std::size_t xi = x.id();
  return x.tape().record(std::move(out), {x}, [xi, mask = std::move(mask)](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad_buffer(xi);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
  });
}

Var straight_through(Var x, Tensor replacement) {
  if (replacement.size() != x.size()) throw DimensionError("straight_through: size mismatch");
  Tensor out = replacement.reshaped(x.shape());
  const std::size_t xi = x.id();
  return x.tape().record(std::move(out), {x}, [xi](Tape& t, std::size_t self) {
    add_into_if(t, xi, t.grad(self));
  });
}

}  // namespace trajmix::tensor
