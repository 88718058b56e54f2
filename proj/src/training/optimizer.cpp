#include "trajmix/training/optimizer.hpp"

#include <cmath>

#include "trajmix/core/errors.hpp"

namespace trajmix::training {

void AdamWConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw DomainError("learning_rate must be >= 0");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw DomainError("betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw DomainError("eps must be positive");
  if (!(weight_decay >= 0.0)) throw DomainError("weight_decay must be >= 0");
}

AdamW::AdamW(AdamWConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void AdamW::step(tensor::ParameterStore& store) {
  if (!store.gradients_ready()) throw StateError("adamw step without accumulated gradients");
  auto& entries = store.entries();
  if (m_.empty()) {
    for (const auto& e : entries) {
      m_.emplace_back(e.value.size(), 0.0);
      v_.emplace_back(e.value.size(), 0.0);
    }
  }
  if (m_.size() != entries.size()) throw StateError("parameter store changed between steps");
  ++steps_;
  const double lr = cfg_.learning_rate;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
  for (std::size_t p = 0; p < entries.size(); ++p) {
    auto& e = entries[p];
    auto& m = m_[p];
    auto& v = v_[p];
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      const double g = e.grad[i];
      double& w = e.value[i];
      w -= lr * cfg_.weight_decay * w;
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
  store.zero_grad();
}

void adamw_step(tensor::ParameterStore& store, AdamW& optimizer) { optimizer.step(store); }

}  // namespace trajmix::training
