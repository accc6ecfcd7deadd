#pragma once

#include <cmath>
#include <vector>

#include "pacc/nn/tensor.hpp"

namespace pacc::nn {

struct LrSchedule {
  double initial = 1e-3;
  double decay = 0.5;       // multiplicative factor
  int64_t interval = 10000; // steps between decays

  double rate(int64_t step) const {
    double lr = initial;
    for (int64_t k = interval; k <= step; k += interval) lr *= decay;
    return lr;
  }
};

// Bias-corrected Adam. Parameter tensors whose gradient is identically zero
// are skipped entirely (lazy update, like sparse-embedding Adam variants),
// so a zero gradient never moves parameters regardless of moment history.
template <typename S>
struct AdamState {
  struct Slot {
    std::vector<S> m, v;
  };
  std::vector<Slot> slots;
  int64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  LrSchedule schedule;

  void attach(const std::vector<Tensor<S>>& params) {
    slots.resize(params.size());
    for (size_t p = 0; p < params.size(); ++p) {
      slots[p].m.assign(params[p]->value.size(), S(0));
      slots[p].v.assign(params[p]->value.size(), S(0));
    }
  }
};

struct AdamStepResult {
  bool applied = true;  // false when a non-finite gradient refused the step
  double learning_rate = 0.0;
};

template <typename S>
AdamStepResult adam_step(const std::vector<Tensor<S>>& params, AdamState<S>& state) {
  if (state.slots.size() != params.size())
    throw Error("ShapeMismatch", "Adam state is not attached to this parameter list");
  for (size_t p = 0; p < params.size(); ++p)
    if (state.slots[p].m.size() != params[p]->value.size())
      throw Error("ShapeMismatch", "Adam slot shape disagrees with parameter");

  // Refuse the whole step on any non-finite gradient.
  for (const auto& param : params)
    for (S gv : param->grad)
      if (!std::isfinite(static_cast<double>(gv))) return {false, 0.0};

  state.t += 1;
  const double lr = state.schedule.rate(state.t - 1);
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (size_t p = 0; p < params.size(); ++p) {
    auto& param = *params[p];
    auto& slot = state.slots[p];
    bool all_zero = true;
    for (S gv : param.grad)
      if (gv != S(0)) {
        all_zero = false;
        break;
      }
    if (all_zero) continue;
    for (size_t i = 0; i < param.value.size(); ++i) {
      const double gv = static_cast<double>(param.grad[i]);
      slot.m[i] = S(state.beta1 * slot.m[i] + (1.0 - state.beta1) * gv);
      slot.v[i] = S(state.beta2 * slot.v[i] + (1.0 - state.beta2) * gv * gv);
      const double mhat = slot.m[i] / bc1;
      const double vhat = slot.v[i] / bc2;
      param.value[i] -= S(lr * mhat / (std::sqrt(vhat) + state.eps));
    }
  }
  return {true, lr};
}

}  // namespace pacc::nn
