#pragma once
// Reverse-process samplers: ancestral (eps-form update), clipped (x0-form
// update with the x0 estimate clamped each step), and deterministic DDIM.
// Triggered generation draws x_T ~ N(g, I).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "denoiser.hpp"
#include "poison.hpp"
#include "rng.hpp"
#include "schedule.hpp"
#include "tensor.hpp"

namespace bdlab {

enum class SamplerKind { Ancestral, Clipped, Ddim };
enum class SigmaRule { Beta, BetaTilde };

struct SamplerConfig {
  SamplerKind kind = SamplerKind::Ancestral;
  SigmaRule sigma = SigmaRule::Beta;
  int ddim_steps = 20;
  double clip_lo = -1.0;
  double clip_hi = 1.0;
  // The x0 term of the clipped update enters with +; the sign-flipped
  // variant exists to demonstrate that the minus reading diverges.
  bool clip_sign_flip = false;
  std::uint64_t seed = 0;

  void validate(int T) const {
    if (!(clip_lo < clip_hi)) throw std::invalid_argument("SamplerConfig: clip bounds need lo < hi");
    if (kind == SamplerKind::Ddim && (ddim_steps < 1 || ddim_steps > T))
      throw std::invalid_argument("SamplerConfig: ddim_steps must lie in [1, T]");
  }
};

inline Tensor init_latent(TensorMode mode, const std::vector<std::int64_t>& dims,
                          const std::optional<Trigger>& trigger, RandomStream& rng) {
  Tensor x(mode, dims);
  rng.fill_normal(x.v);
  if (trigger) {
    require_same_shape(x, trigger->pattern, "init_latent");
    for (std::int64_t i = 0; i < x.size(); ++i)
      x.v[static_cast<std::size_t>(i)] += trigger->pattern.v[static_cast<std::size_t>(i)];
  }
  return x;
}

namespace detail {

inline void check_latent(const Tensor& x, int t) {
  for (double v : x.v)
    if (!std::isfinite(v))
      throw std::runtime_error("sampling: non-finite latent at t = " + std::to_string(t));
}

inline double sigma_t(const NoiseSchedule& s, int t, SigmaRule rule) {
  return rule == SigmaRule::Beta ? std::sqrt(s.beta(t)) : std::sqrt(s.beta_tilde(t));
}

}  // namespace detail

// Alg.-2 ancestral chain:
//   x_{t-1} = (1/sqrt(a_t)) (x_t - ((1 - a_t)/sqrt(1 - ab_t)) eps_theta) + sigma_t z
// with z = 0 at t = 1.
inline Tensor ancestral_sample(const DenoiserParams& params, const NoiseSchedule& s,
                               const Tensor& x_T, const SamplerConfig& cfg, RandomStream& rng) {
  cfg.validate(s.T());
  Tensor x = x_T;
  Tensor z = x_T;
  for (int t = s.T(); t >= 1; --t) {
    const Tensor eps_hat = predict_noise(params, x, t);
    const double inv_sa = 1.0 / s.sqrt_alpha(t);
    const double coef = s.beta(t) / s.delta(t);
    const double sig = t > 1 ? detail::sigma_t(s, t, cfg.sigma) : 0.0;
    if (t > 1) rng.fill_normal(z.v);
    for (std::int64_t i = 0; i < x.size(); ++i) {
      const auto k = static_cast<std::size_t>(i);
      x.v[k] = inv_sa * (x.v[k] - coef * eps_hat.v[k]) + (t > 1 ? sig * z.v[k] : 0.0);
    }
    detail::check_latent(x, t - 1);
  }
  return x;
}

// Eq.-11 chain: estimate x0, clamp it, then take the clean posterior-mean
// step in x0-form. At t = 1 the coefficients degenerate to x_0 = x0_hat.
inline Tensor clipped_sample(const DenoiserParams& params, const NoiseSchedule& s,
                             const Tensor& x_T, const SamplerConfig& cfg, RandomStream& rng) {
  cfg.validate(s.T());
  Tensor x = x_T;
  Tensor z = x_T;
  const double x0_sign = cfg.clip_sign_flip ? -1.0 : 1.0;
  for (int t = s.T(); t >= 1; --t) {
    const Tensor eps_hat = predict_noise(params, x, t);
    const double inv_sab = 1.0 / s.sqrt_alpha_bar(t);
    const double d = s.delta(t);
    const double omab = 1.0 - s.alpha_bar(t);
    const double cxt = s.sqrt_alpha(t) * (1.0 - s.alpha_bar(t - 1)) / omab;
    const double cx0 = s.sqrt_alpha_bar(t - 1) * s.beta(t) / omab;
    const double sig = t > 1 ? detail::sigma_t(s, t, cfg.sigma) : 0.0;
    if (t > 1) rng.fill_normal(z.v);
    for (std::int64_t i = 0; i < x.size(); ++i) {
      const auto k = static_cast<std::size_t>(i);
      const double x0_hat =
          std::clamp(inv_sab * (x.v[k] - d * eps_hat.v[k]), cfg.clip_lo, cfg.clip_hi);
      x.v[k] = cxt * x.v[k] + x0_sign * cx0 * x0_hat + (t > 1 ? sig * z.v[k] : 0.0);
    }
    detail::check_latent(x, t - 1);
  }
  return x;
}

// Evenly spaced step subsequence tau_1 < ... < tau_S = T.
inline std::vector<int> ddim_subsequence(int T, int steps) {
  if (steps < 1 || steps > T)
    throw std::invalid_argument("ddim_subsequence: invalid subsequence");
  std::vector<int> tau(static_cast<std::size_t>(steps));
  for (int i = 1; i <= steps; ++i) {
    const int t = static_cast<int>(std::llround(static_cast<double>(i) * T / steps));
    tau[static_cast<std::size_t>(i - 1)] = std::max(1, std::min(T, t));
  }
  for (std::size_t i = 1; i < tau.size(); ++i)
    if (tau[i] <= tau[i - 1]) throw std::invalid_argument("ddim_subsequence: invalid subsequence");
  return tau;
}

// Deterministic DDIM (eta = 0):
//   x_prev = sqrt(ab_prev) x0_hat + sqrt(1 - ab_prev) eps_theta.
inline Tensor ddim_sample(const DenoiserParams& params, const NoiseSchedule& s, const Tensor& x_T,
                          const SamplerConfig& cfg) {
  cfg.validate(s.T());
  const auto tau = ddim_subsequence(s.T(), cfg.ddim_steps);
  Tensor x = x_T;
  for (std::size_t i = tau.size(); i-- > 0;) {
    const int t = tau[i];
    const int prev = i > 0 ? tau[i - 1] : 0;
    const Tensor eps_hat = predict_noise(params, x, t);
    const double inv_sab = 1.0 / s.sqrt_alpha_bar(t);
    const double d = s.delta(t);
    const double sab_prev = s.sqrt_alpha_bar(prev);
    const double d_prev = std::sqrt(1.0 - s.alpha_bar(prev));
    for (std::int64_t j = 0; j < x.size(); ++j) {
      const auto k = static_cast<std::size_t>(j);
      const double x0_hat = inv_sab * (x.v[k] - d * eps_hat.v[k]);
      x.v[k] = sab_prev * x0_hat + d_prev * eps_hat.v[k];
    }
    detail::check_latent(x, prev);
  }
  return x;
}

inline Tensor sample_one(const DenoiserParams& params, const NoiseSchedule& s, const Tensor& x_T,
                         const SamplerConfig& cfg, RandomStream& rng) {
  switch (cfg.kind) {
    case SamplerKind::Ancestral: return ancestral_sample(params, s, x_T, cfg, rng);
    case SamplerKind::Clipped: return clipped_sample(params, s, x_T, cfg, rng);
    case SamplerKind::Ddim: return ddim_sample(params, s, x_T, cfg);
  }
  throw std::logic_error("sample_one: unknown sampler kind");
}

// n independent chains; chain i draws its init latent and then its chain
// noise, all from the supplied stream in order.
inline std::vector<Tensor> sample_batch(const DenoiserParams& params, const NoiseSchedule& s,
                                        std::int64_t n, const std::optional<Trigger>& trigger,
                                        const SamplerConfig& cfg, RandomStream& rng) {
  std::vector<Tensor> out;
  out.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const Tensor x_T = init_latent(params.arch.mode, params.arch.data_dims, trigger, rng);
    out.push_back(sample_one(params, s, x_T, cfg, rng));
  }
  return out;
}

// Model space [-1, 1] -> display space [0, 1], clamped.
inline Tensor to_display(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.v) v = std::clamp((v + 1.0) / 2.0, 0.0, 1.0);
  return out;
}

}  // namespace bdlab
