#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "pvg/core/tensor.hpp"

namespace pvg {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;
};

template <typename Scalar>
struct AdamWState {
  long step = 0;
  std::vector<Vector<Scalar>> m;
  std::vector<Vector<Scalar>> v;
};

// Linear warmup to `base_lr` over `warmup` steps, then half-cosine decay to
// zero at step `total`. Step t in [0, total]; values past `total` are 0.
inline double cosine_lr(long t, double base_lr, long warmup, long total) {
  if (t < warmup) return base_lr * static_cast<double>(t + 1) / static_cast<double>(warmup);
  if (t >= total) return 0.0;
  const double progress = static_cast<double>(t - warmup) / static_cast<double>(total - warmup);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

// One decoupled-weight-decay Adam update with bias-corrected moments:
//   w <- w (1 - lr wd) - lr mhat / (sqrt(vhat) + eps)
// `decay[i]` selects which tensors receive weight decay.
template <typename Scalar>
void adamw_step(std::vector<Tensor<Scalar>*> params, const std::vector<const Tensor<Scalar>*>& grads,
                AdamWState<Scalar>& state, const AdamWConfig& config, double lr_t,
                const std::vector<bool>& decay) {
  if (params.size() != grads.size() || params.size() != decay.size())
    throw DimensionError("adamw_step: parameter, gradient and decay lists differ in length");
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.push_back(Vector<Scalar>::Zero(p->size()));
      state.v.push_back(Vector<Scalar>::Zero(p->size()));
    }
  }
  if (state.m.size() != params.size()) throw DimensionError("adamw_step: optimizer state does not match parameters");
  ++state.step;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  const Scalar b1 = static_cast<Scalar>(config.beta1), b2 = static_cast<Scalar>(config.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& w = params[i]->data();
    const auto& g = grads[i]->data();
    if (g.size() != w.size() || state.m[i].size() != w.size())
      throw DimensionError("adamw_step: shape mismatch for tensor " + std::to_string(i));
    state.m[i] = b1 * state.m[i] + (Scalar(1) - b1) * g;
    state.v[i] = b2 * state.v[i] + (Scalar(1) - b2) * g.cwiseProduct(g);
    if (decay[i]) w *= static_cast<Scalar>(1.0 - lr_t * config.weight_decay);
    const auto mhat = state.m[i].array() / static_cast<Scalar>(bc1);
    const auto vhat = state.v[i].array() / static_cast<Scalar>(bc2);
    w.array() -= static_cast<Scalar>(lr_t) * mhat / (vhat.sqrt() + static_cast<Scalar>(config.eps));
  }
}

}  // namespace pvg
