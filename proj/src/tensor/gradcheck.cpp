#include "trajmix/tensor/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace trajmix::tensor {

namespace {

void update(GradCheckResult& r, double analytic, double numeric, const std::string& name,
            std::size_t idx) {
  const double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
  ++r.checked;
  if (r.worst.empty() || err > r.max_rel_error) {
    r.max_rel_error = err;
    r.worst = name + "[" + std::to_string(idx) + "]";
  }
}

double eval_inputs(const InputLossFn& fn, const std::vector<Tensor>& inputs) {
  Tape tape(Tape::Mode::kInference);
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.variable(t));
  return fn(tape, vars).value()[0];
}

}  // namespace

GradCheckResult finite_difference_check(const InputLossFn& fn, std::vector<Tensor> inputs,
                                        double step, std::size_t stride) {
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(tape.variable(t));
    Var loss = fn(tape, vars);
    tape.backward(loss);
    for (const auto& v : vars) analytic.push_back(tape.grad(v));
  }
  GradCheckResult r;
  stride = std::max<std::size_t>(stride, 1);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].size(); i += stride) {
      const double orig = inputs[k][i];
      inputs[k][i] = orig + step;
      const double fp = eval_inputs(fn, inputs);
      inputs[k][i] = orig - step;
      const double fm = eval_inputs(fn, inputs);
      inputs[k][i] = orig;
      update(r, analytic[k][i], (fp - fm) / (2.0 * step), "input" + std::to_string(k), i);
    }
  }
  return r;
}

GradCheckResult finite_difference_check(const ParamLossFn& fn, ParameterStore& store,
                                        double step, std::size_t stride) {
  store.zero_grad();
  {
    Tape tape(store);
    Var loss = fn(tape);
    tape.backward(loss);
    tape.accumulate_into(store);
  }
  auto eval = [&] {
    Tape tape(store, Tape::Mode::kInference);
    return fn(tape).value()[0];
  };
  GradCheckResult r;
  stride = std::max<std::size_t>(stride, 1);
  for (auto& e : store.entries()) {
    for (std::size_t i = 0; i < e.value.size(); i += stride) {
      const double orig = e.value[i];
      e.value[i] = orig + step;
      const double fp = eval();
      e.value[i] = orig - step;
      const double fm = eval();
      e.value[i] = orig;
      update(r, e.grad[i], (fp - fm) / (2.0 * step), e.name, i);
    }
  }
  return r;
}

}  // namespace trajmix::tensor
