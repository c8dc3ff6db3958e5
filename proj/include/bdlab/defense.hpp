#pragma once
// ANP-style trojan exposure: per-entry weight multipliers inside a box
// [1 - b, 1 + b], driven by projected Adam ascent on the clean DDPM loss;
// the perturbed model's reconstructions from plain Gaussian noise are
// recorded every epoch so their MSE to a suspected target can be tracked.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "denoiser.hpp"
#include "metrics.hpp"
#include "optimizer.hpp"
#include "rng.hpp"
#include "sampling.hpp"
#include "schedule.hpp"
#include "tensor.hpp"
#include "training.hpp"

namespace bdlab {

struct PerturbationState {
  std::vector<double> multipliers;  // same flat layout as DenoiserParams::w
  double budget = 0.0;
  AdamState adam;

  PerturbationState() = default;
  PerturbationState(std::size_t n, double b)
      : multipliers(n, 1.0), budget(b), adam(n) {
    if (b < 0.0) throw std::invalid_argument("PerturbationState: budget must be >= 0");
  }

  void project() {
    const double lo = 1.0 - budget, hi = 1.0 + budget;
    for (double& m : multipliers) m = std::clamp(m, lo, hi);
  }
};

inline DenoiserParams perturbed_params(const DenoiserParams& params,
                                       const PerturbationState& pert) {
  if (pert.multipliers.size() != params.w.size())
    throw std::invalid_argument("perturbed_params: shape mismatch");
  DenoiserParams out = params;
  for (std::size_t i = 0; i < out.w.size(); ++i) out.w[i] = pert.multipliers[i] * params.w[i];
  return out;
}

inline Tensor perturbed_forward(const DenoiserParams& params, const PerturbationState& pert,
                                const Tensor& x_t, int t) {
  return predict_noise(perturbed_params(params, pert), x_t, t);
}

inline double reconstruction_mse(const std::vector<Tensor>& samples, const Tensor& y) {
  return target_mse(samples, y);
}

struct AnpOptions {
  int batch_size = 128;
  int recon_count = 256;
  SamplerConfig sampler;          // reconstruction sampler (ancestral default)
  std::uint64_t recon_seed = 0;   // per-epoch streams derive from this
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct AnpResult {
  PerturbationState pert;
  std::vector<std::vector<Tensor>> per_epoch_reconstruction;
  std::vector<double> per_epoch_clean_loss;
};

// Projected Adam ascent of the clean DDPM loss over the multipliers, one
// pass over clean_source per epoch, then recon_count reconstructions from
// the perturbed model. Reconstruction streams are derived from
// opt.recon_seed per epoch, so a budget-0 run reproduces plain sampling
// bit-for-bit on the same seeds.
inline AnpResult anp_search(const DenoiserParams& params, const std::vector<Tensor>& clean_source,
                            const NoiseSchedule& s, double budget, double lr, int epochs,
                            RandomStream& rng, const AnpOptions& opt = {}) {
  params.validate();
  if (clean_source.empty()) throw std::invalid_argument("anp_search: empty clean source");
  if (budget < 0.0) throw std::invalid_argument("anp_search: budget must be >= 0");
  if (epochs < 0) throw std::invalid_argument("anp_search: epochs must be >= 0");

  AnpResult result;
  result.pert = PerturbationState(params.w.size(), budget);
  AdamConfig ascent{lr, opt.adam_beta1, opt.adam_beta2, opt.adam_eps};

  std::vector<std::size_t> order(clean_source.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<Tensor> inputs, targets;
  std::vector<int> timesteps;
  std::vector<double> grad_w, grad_m;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(opt.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(opt.batch_size));
      inputs.clear();
      targets.clear();
      timesteps.clear();
      for (std::size_t i = begin; i < end; ++i) {
        const Tensor& x = clean_source[order[i]];
        const int t = 1 + static_cast<int>(rng.randint(static_cast<std::uint64_t>(s.T())));
        Tensor eps = x;
        rng.fill_normal(eps.v);
        auto [input, target] = clean_training_example(x, s, t, eps);
        inputs.push_back(std::move(input));
        targets.push_back(std::move(target));
        timesteps.push_back(t);
      }
      const DenoiserParams eff = perturbed_params(params, result.pert);
      const double loss = loss_gradient(eff, inputs, targets, timesteps, grad_w);
      if (!std::isfinite(loss))
        throw std::runtime_error("anp_search: divergent loss at epoch " + std::to_string(epoch));
      grad_m.assign(grad_w.size(), 0.0);
      for (std::size_t i = 0; i < grad_w.size(); ++i) grad_m[i] = -grad_w[i] * params.w[i];
      adam_step(result.pert.adam, result.pert.multipliers, grad_m, ascent);
      result.pert.project();
      epoch_loss += loss * static_cast<double>(end - begin);
      seen += end - begin;
    }
    result.per_epoch_clean_loss.push_back(epoch_loss / static_cast<double>(seen));

    const DenoiserParams eff = perturbed_params(params, result.pert);
    RandomStream recon_rng(derive_seed(opt.recon_seed, "epoch" + std::to_string(epoch)));
    result.per_epoch_reconstruction.push_back(
        sample_batch(eff, s, opt.recon_count, std::nullopt, opt.sampler, recon_rng));
  }
  return result;
}

}  // namespace bdlab
