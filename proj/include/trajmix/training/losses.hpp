#pragma once

#include <vector>

#include "trajmix/constraints/sector.hpp"
#include "trajmix/core/geometry.hpp"
#include "trajmix/core/rng.hpp"
#include "trajmix/head/variational_head.hpp"

namespace trajmix::training {

inline constexpr double kUncertaintyEps = 1e-6;

struct LossWeights {
  double yaw = 1.0;
  double uncertainty = 0.1;
  double kl = 0.01;
  double weight_decay = 0.001;
  double latent_kl = 0.0;  // standard-normal KL on the latent; 0 leaves it out

  void validate() const;
};

struct LossBreakdown {
  double total = 0.0;
  double pos = 0.0;
  double yaw = 0.0;
  double unc = 0.0;
  double kl = 0.0;
};

struct PositionYawLoss {
  double pos = 0.0;
  double yaw = 0.0;
};

/// Mean per-point L1 (x, y) error and mean absolute wrapped yaw error over
/// batch x samples x timesteps. samples[b] are the draws for ground truth gt[b].
PositionYawLoss position_yaw_loss(const std::vector<std::vector<TrajectorySample>>& samples,
                                  const std::vector<Trajectory>& gt);

/// -mean log(sigma^2 + eps).
double uncertainty_loss(const std::vector<double>& stds);

/// KL(Cat(pi) || Uniform(K)) with 0 log 0 = 0. Throws DomainError on negative weights.
double kl_categorical_uniform(const std::vector<double>& weights);

/// Plain-value composite loss for a batch. stds[b] and weights[b] belong to batch item b;
/// the uncertainty and KL terms are averaged over the batch.
LossBreakdown composite_loss(const std::vector<std::vector<TrajectorySample>>& samples,
                             const std::vector<Trajectory>& gt,
                             const std::vector<std::vector<double>>& stds,
                             const std::vector<std::vector<double>>& weights, const LossWeights& w);

/// Tape counterparts.
tensor::Var uncertainty_loss(tensor::Var stds);
tensor::Var kl_categorical_uniform(tensor::Var weights, tensor::Var log_weights);

/// One reparameterized draw per mixture: (K * T) x D rows, component-major.
tensor::Var draw_samples(const head::MixtureVars& m, std::size_t act_dim, Rng& rng,
                         double sigma_floor = 1e-6);

/// Sector projection of the (x, y) columns around `anchor`; other columns pass through.
tensor::Var constrain_samples(tensor::Var samples, const Pose2D& anchor,
                              const constraints::SectorSpec& spec);

struct LossVars {
  tensor::Var total;
  tensor::Var pos;
  tensor::Var yaw;
  tensor::Var unc;
  tensor::Var kl;

  LossBreakdown values() const;
};

/// Composite loss of one batch item from (K * T) x D samples against a T-point truth.
LossVars item_loss(tensor::Var samples, const Trajectory& gt, const head::MixtureVars& m,
                   const LossWeights& w);

}  // namespace trajmix::training
