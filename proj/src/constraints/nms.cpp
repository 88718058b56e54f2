#include "trajmix/constraints/nms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "trajmix/core/errors.hpp"

namespace trajmix::constraints {

void NmsConfig::validate() const {
  if (n_samples == 0) throw DomainError("n_samples must be at least 1");
  if (!(d_min >= 0.0)) throw DomainError("d_min must be non-negative");
  if (m_sub == 0) throw DomainError("m_sub must be at least 1");
  if (!(sigma_floor > 0.0)) throw DomainError("sigma_floor must be positive");
}

std::vector<TrajectorySample> nms_sample(const head::GaussianMixtureTrajectory& gmm,
                                         const NmsConfig& cfg, Rng& rng, double dt) {
  cfg.validate();
  gmm.validate();
  if (gmm.d < 2) throw DimensionError("trajectory mixture needs at least x and y");

  struct Candidate {
    TrajectorySample sample;
    std::size_t draw;
  };
  std::vector<Candidate> cands;
  cands.reserve(gmm.k * cfg.m_sub);
  for (std::size_t k = 0; k < gmm.k; ++k) {
    for (std::size_t m = 0; m < cfg.m_sub; ++m) {
      TrajectorySample s;
      s.probability = gmm.weights[k];
      s.mixture_index = k;
      s.trajectory.dt = dt;
      s.trajectory.points.reserve(gmm.t);
      for (std::size_t t = 0; t < gmm.t; ++t) {
        double v[3] = {0.0, 0.0, 0.0};
        for (std::size_t d = 0; d < gmm.d; ++d) {
          const double sigma = std::max(gmm.stddev(k, t, d), cfg.sigma_floor);
          const double draw = gmm.mean(k, t, d) + sigma * rng.normal();
          if (d < 3) v[d] = draw;
        }
        s.trajectory.points.emplace_back(v[0], v[1], v[2]);
      }
      cands.push_back({std::move(s), m});
    }
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.sample.probability != b.sample.probability) return a.sample.probability > b.sample.probability;
    if (a.sample.mixture_index != b.sample.mixture_index)
      return a.sample.mixture_index < b.sample.mixture_index;
    return a.draw < b.draw;
  });

  std::vector<TrajectorySample> selected;
  for (const auto& c : cands) {
    if (selected.size() == cfg.n_samples) break;
    const Pose2D& end = c.sample.trajectory.back();
    bool keep = true;
    for (const auto& s : selected) {
      const Pose2D& e = s.trajectory.back();
      if (std::hypot(end.x - e.x, end.y - e.y) <= cfg.d_min) {
        keep = false;
        break;
      }
    }
    if (keep) selected.push_back(c.sample);
  }
  const std::size_t unique = selected.size();
  for (std::size_t i = 0; selected.size() < cfg.n_samples; ++i) {
    TrajectorySample dup = selected[i % unique];
    dup.padded = true;
    selected.push_back(std::move(dup));
  }
  return selected;
}

}  // namespace trajmix::constraints
