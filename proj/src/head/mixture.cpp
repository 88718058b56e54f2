#include "trajmix/head/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "trajmix/core/errors.hpp"

namespace trajmix::head {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

void GaussianMixtureTrajectory::validate() const {
  if (k == 0 || t == 0 || d == 0) throw DimensionError("empty mixture");
  const std::size_t n = k * t * d;
  if (means.size() != n || stds.size() != n || weights.size() != k) {
    throw DimensionError("mixture arrays do not match k * t * d");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("mixture weight outside [0, 1]");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw DomainError("mixture weights do not sum to 1");
  for (double s : stds)
    if (!(s > 0.0) || !std::isfinite(s)) throw DomainError("mixture std must be positive");
  for (double m : means)
    if (!std::isfinite(m)) throw DomainError("non-finite mixture mean");
}

double component_log_density(const std::vector<double>& y, const GaussianMixtureTrajectory& gmm,
                             std::size_t component) {
  const std::size_t n = gmm.t * gmm.d;
  if (y.size() != n) throw DimensionError("observation length does not match the mixture");
  double acc = 0.0;
  const std::size_t base = component * n;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = gmm.stds[base + i];
    if (!(s > 0.0)) throw DomainError("degenerate mixture std");
    const double z = (y[i] - gmm.means[base + i]) / s;
    acc += -0.5 * z * z - std::log(s) - 0.5 * kLog2Pi;
  }
  return acc;
}

double mixture_log_likelihood(const std::vector<double>& y, const GaussianMixtureTrajectory& gmm) {
  std::vector<double> terms(gmm.k);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < gmm.k; ++c) {
    terms[c] = std::log(gmm.weights[c]) + component_log_density(y, gmm, c);
    top = std::max(top, terms[c]);
  }
  if (top == -std::numeric_limits<double>::infinity()) return top;
  double z = 0.0;
  for (double v : terms) z += std::exp(v - top);
  return top + std::log(z);
}

}  // namespace trajmix::head
