#pragma once

#include <string>
#include <vector>

#include "trajmix/causal/encoder.hpp"
#include "trajmix/head/mixture.hpp"
#include "trajmix/tensor/layers.hpp"

namespace trajmix::head {

using causal::Mode;

struct HeadConfig {
  std::size_t d_model = 128;
  std::size_t mixtures = 6;
  std::size_t future_steps = 15;
  std::size_t act_dim = 3;
  std::size_t latent_dim = 16;
  double log_var_max = 10.0;
};

struct LatentPosterior {
  std::vector<double> mean;
  std::vector<double> std;
};

/// Tape handles of the latent posterior.
struct LatentVars {
  tensor::Var mean;     // 1 x latent
  tensor::Var log_var;  // 1 x latent, clamped
  tensor::Var std;      // 1 x latent
};

/// Tape handles of one predicted mixture.
struct MixtureVars {
  tensor::Var means;        // K x (T * D)
  tensor::Var log_var;      // K x (T * D), clamped
  tensor::Var stds;         // K x (T * D)
  tensor::Var logits;       // 1 x K
  tensor::Var weights;      // 1 x K
  tensor::Var log_weights;  // 1 x K
};

struct HeadOutput {
  MixtureVars mixture;
  LatentVars latent;
  tensor::Var v;      // 1 x latent
  tensor::Var v_seq;  // T x latent
};

/// Variational Gaussian-mixture head over future trajectories.
class VariationalHead {
 public:
  static VariationalHead create(tensor::ParameterStore& store, const std::string& name,
                                const HeadConfig& cfg, Rng& rng);

  const HeadConfig& config() const { return cfg_; }

  LatentVars latent_posterior(tensor::Tape& tape, tensor::Var context) const;
  /// Reparameterized draw in training (rng required), exactly the mean at inference.
  tensor::Var sample_latent(tensor::Tape& tape, const LatentVars& posterior, Mode mode,
                            Rng* rng) const;
  /// Hidden states of T LSTM steps fed with v each step from a zero state, T x latent.
  tensor::Var propagate_latent(tensor::Tape& tape, tensor::Var v) const;
  MixtureVars predict_mixture(tensor::Tape& tape, tensor::Var context, tensor::Var v_seq) const;

  HeadOutput forward(tensor::Tape& tape, tensor::Var context, Mode mode, Rng* rng) const;

 private:
  HeadConfig cfg_;
  std::string name_;
  tensor::Linear mean_head_;
  tensor::Linear log_var_head_;
  tensor::Linear latent_offset_;  // v_seq -> per-step action offset, no bias
  tensor::Mlp pi_head_;
  tensor::LstmCell latent_mean_;
  tensor::Linear latent_log_var_;
  tensor::LstmCell latent_transition_;
};

GaussianMixtureTrajectory to_mixture(const MixtureVars& m, std::size_t future_steps,
                                     std::size_t act_dim);
LatentPosterior to_posterior(const LatentVars& l);

/// Plain-value latent draw: exactly the mean in inference mode.
std::vector<double> sample_latent(const LatentPosterior& posterior, Mode mode, Rng& rng);

/// Differentiable mixture log-likelihood of y (1 x T*D, or T x D) under the mixture.
tensor::Var mixture_log_likelihood(tensor::Var y, const MixtureVars& m);

/// KL(N(mu, sigma^2) || N(0, I)) of the latent posterior.
tensor::Var latent_kl_standard_normal(const LatentVars& l);

}  // namespace trajmix::head
