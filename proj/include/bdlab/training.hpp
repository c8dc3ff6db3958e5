#pragma once
// The combined backdoor loss and its training loop: clean branch regresses
// eps on the clean marginal, poisoned branch regresses
// (rho_t delta_t / (1 - alpha_t)) r + eps on the backdoored marginal with
// x0' = y. One (t, eps) draw per sample per step; the poison split is fixed
// once before the loop.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "denoiser.hpp"
#include "diffusion.hpp"
#include "optimizer.hpp"
#include "poison.hpp"
#include "rng.hpp"
#include "schedule.hpp"
#include "tensor.hpp"

namespace bdlab {

enum class TrainMode { Scratch, Finetune };

struct TrainConfig {
  int epochs = 50;
  int batch_size = 128;
  AdamConfig adam;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::Finetune;
  std::string checkpoint_in;  // finetune only; resolved by the harness
  int checkpoint_every = 0;   // 0 = final checkpoint only

  void validate() const {
    if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch size must be >= 1");
    if (!(adam.lr >= 0.0)) throw std::invalid_argument("TrainConfig: learning rate must be >= 0");
  }
};

inline std::pair<Tensor, Tensor> clean_training_example(const Tensor& x, const NoiseSchedule& s,
                                                        int t, const Tensor& eps) {
  return {forward_marginal_clean(s, x, t, eps), eps};
}

inline std::pair<Tensor, Tensor> poisoned_training_example(const Tensor& x, const PoisonSpec& spec,
                                                           const NoiseSchedule& s, int t,
                                                           const Tensor& eps) {
  const Tensor r = apply_trigger(x, spec.trigger);
  Tensor input = forward_marginal_backdoor(s, spec.target, r, t, eps);
  const double c = regression_r_coef(s, t);
  Tensor target = eps;
  for (std::int64_t i = 0; i < target.size(); ++i)
    target.v[static_cast<std::size_t>(i)] += c * r.v[static_cast<std::size_t>(i)];
  return {std::move(input), std::move(target)};
}

struct BatchItem {
  const Tensor* x = nullptr;
  bool poisoned = false;
};

// Draw order per element, in batch order: t ~ Uniform{1..T}, then the eps
// entries. Branch selection depends only on membership.
inline double baddiffusion_loss_batch(const DenoiserParams& params,
                                      const std::vector<BatchItem>& batch, const PoisonSpec& spec,
                                      const NoiseSchedule& s, RandomStream& rng,
                                      std::vector<double>& grads) {
  if (batch.empty()) throw std::invalid_argument("baddiffusion_loss_batch: empty batch");
  std::vector<Tensor> inputs, targets;
  std::vector<int> timesteps;
  inputs.reserve(batch.size());
  targets.reserve(batch.size());
  timesteps.reserve(batch.size());
  for (const BatchItem& item : batch) {
    const int t = 1 + static_cast<int>(rng.randint(static_cast<std::uint64_t>(s.T())));
    Tensor eps = *item.x;
    rng.fill_normal(eps.v);
    auto [input, target] = item.poisoned ? poisoned_training_example(*item.x, spec, s, t, eps)
                                         : clean_training_example(*item.x, s, t, eps);
    inputs.push_back(std::move(input));
    targets.push_back(std::move(target));
    timesteps.push_back(t);
  }
  return loss_gradient(params, inputs, targets, timesteps, grads);
}

struct TrainResult {
  DenoiserParams params;
  std::vector<double> history;  // per-epoch mean loss
};

using EpochCallback = std::function<void(int epoch, const DenoiserParams&, double epoch_loss)>;

inline TrainResult train(const TrainConfig& config, const std::vector<Tensor>& dataset,
                         const PoisonSpec& spec, const NoiseSchedule& s,
                         DenoiserParams init_params, const EpochCallback& on_epoch = nullptr) {
  config.validate();
  init_params.validate();
  if (dataset.empty()) throw std::invalid_argument("train: dataset must be non-empty");

  const auto split = split_dataset(static_cast<std::int64_t>(dataset.size()), spec);
  std::vector<BatchItem> entries;
  entries.reserve(dataset.size() + (spec.overlap ? split.poisoned.size() : 0));
  for (auto i : split.clean) entries.push_back({&dataset[static_cast<std::size_t>(i)], false});
  for (auto i : split.poisoned) entries.push_back({&dataset[static_cast<std::size_t>(i)], true});
  if (spec.overlap)
    for (auto i : split.poisoned) entries.push_back({&dataset[static_cast<std::size_t>(i)], false});

  TrainResult result;
  result.params = std::move(init_params);
  AdamState adam(result.params.w.size());
  RandomStream rng(config.seed);
  std::vector<double> grads;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(entries);
    double epoch_loss = 0.0;
    std::size_t seen = 0, step = 0;
    for (std::size_t begin = 0; begin < entries.size(); begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(entries.size(), begin + static_cast<std::size_t>(config.batch_size));
      std::vector<BatchItem> batch(entries.begin() + static_cast<std::ptrdiff_t>(begin),
                                   entries.begin() + static_cast<std::ptrdiff_t>(end));
      const double loss = baddiffusion_loss_batch(result.params, batch, spec, s, rng, grads);
      if (!std::isfinite(loss))
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", step " + std::to_string(step) + ", lr " +
                                 std::to_string(config.adam.lr));
      adam_step(adam, result.params.w, grads, config.adam);
      epoch_loss += loss * static_cast<double>(end - begin);
      seen += end - begin;
      ++step;
    }
    result.history.push_back(epoch_loss / static_cast<double>(seen));
    if (on_epoch) on_epoch(epoch, result.params, result.history.back());
  }
  return result;
}

}  // namespace bdlab
