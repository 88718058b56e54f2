#pragma once

#include <cstddef>
#include <vector>

namespace trajmix::head {

/// K-component diagonal Gaussian mixture over T x D future actions.
struct GaussianMixtureTrajectory {
  std::size_t k = 0;
  std::size_t t = 0;
  std::size_t d = 0;
  std::vector<double> means;    // k * t * d, component-major
  std::vector<double> stds;     // same layout, strictly positive
  std::vector<double> weights;  // k, on the simplex

  std::size_t index(std::size_t ki, std::size_t ti, std::size_t di) const {
    return (ki * t + ti) * d + di;
  }
  double mean(std::size_t ki, std::size_t ti, std::size_t di) const {
    return means[index(ki, ti, di)];
  }
  double stddev(std::size_t ki, std::size_t ti, std::size_t di) const {
    return stds[index(ki, ti, di)];
  }

  /// Throws DimensionError on inconsistent sizes and DomainError on invalid values.
  void validate() const;
};

/// log sum_k pi_k N(y | mu_k, diag(sigma_k^2)) for y laid out as t * d values.
double mixture_log_likelihood(const std::vector<double>& y, const GaussianMixtureTrajectory& gmm);

/// Log density of one component.
double component_log_density(const std::vector<double>& y, const GaussianMixtureTrajectory& gmm,
                             std::size_t component);

}  // namespace trajmix::head
