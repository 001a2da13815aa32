// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "seqdesc/errors.hpp"
#include "seqdesc/tensor.hpp"

namespace seqdesc {

/// Linear per-step warm-up from 0 to lr_base over the first
/// warmup_epochs * steps_per_epoch steps, constant lr_base afterwards.
inline double lr_at(double lr_base, std::size_t warmup_epochs, std::size_t global_step,
                    std::size_t steps_per_epoch) {
  std::size_t warm_steps = warmup_epochs * steps_per_epoch;
  if (warm_steps == 0 || global_step >= warm_steps) return lr_base;
  return lr_base *
         (static_cast<double>(global_step) / static_cast<double>(warm_steps));
}

/// First and second moment buffers plus the shared step counter.
template <typename T>
struct AdamState {
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  std::int64_t t = 0;

  template <typename Params>
  static AdamState init_like(const Params& params) {
    AdamState s;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const auto& p : params) {
      s.m.emplace_back(p->shape());
      s.v.emplace_back(p->shape());
    }
    return s;
  }
};

/// One Adam step with bias correction over a parameter group. Decoupled
/// weight decay shrinks parameters by lr * weight_decay before the moment
/// update is applied.
template <typename T>
void adam_step(const std::vector<Tensor<T>*>& params,
               const std::vector<Tensor<T>>& grads, AdamState<T>& state, double lr,
               double beta1, double beta2, double weight_decay, double eps_adam) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw ContractError("adam_step: parameter/gradient/state group sizes differ");
  state.t += 1;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = *params[i];
    const Tensor<T>& g = grads[i];
    if (!p.same_shape(g))
      throw ContractError("adam_step: gradient shape " + shape_to_string(g.shape()) +
                          " does not match parameter shape " +
                          shape_to_string(p.shape()));
    Tensor<T>& m = state.m[i];
    Tensor<T>& v = state.v[i];
    for (std::size_t j = 0; j < p.numel(); ++j) {
      double pj = static_cast<double>(p[j]) * (1.0 - lr * weight_decay);
      double gj = static_cast<double>(g[j]);
      double mj = beta1 * static_cast<double>(m[j]) + (1.0 - beta1) * gj;
      double vj = beta2 * static_cast<double>(v[j]) + (1.0 - beta2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      double update = (mj / bc1) / (std::sqrt(vj / bc2) + eps_adam);
      p[j] = static_cast<T>(pj - lr * update);
    }
  }
}

}  // namespace seqdesc
