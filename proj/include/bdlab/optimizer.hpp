#pragma once
// Standard Adam with bias correction, on flat parameter arrays.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace bdlab {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

inline void adam_step(AdamState& state, std::vector<double>& params,
                      const std::vector<double>& grads, const AdamConfig& cfg) {
  if (state.m.size() != params.size() || grads.size() != params.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

}  // namespace bdlab
