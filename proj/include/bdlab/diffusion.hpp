#pragma once
// Clean and backdoored diffusion processes: forward marginals, one-step
// transitions, and exact posterior means in both the x0-form and the
// eps-form. The backdoored marginal is
//   x_t' = sqrt(ab_t) x0' + (1 - sqrt(ab_t)) r + sqrt(1 - ab_t) eps
// and all posterior coefficients follow from exact Gaussian conditioning.

#include <stdexcept>

#include "schedule.hpp"
#include "tensor.hpp"

namespace bdlab {

inline void require_step(const NoiseSchedule& s, int t, const char* op) {
  if (t < 1 || t > s.T())
    throw std::out_of_range(std::string(op) + ": t outside [1, T]");
}

inline void require_posterior_step(const NoiseSchedule& s, int t, const char* op) {
  if (t == 1)
    throw std::domain_error(std::string(op) + ": degenerate step t = 1 (posterior collapses to x0)");
  require_step(s, t, op);
}

inline Tensor forward_marginal_clean(const NoiseSchedule& s, const Tensor& x0, int t,
                                     const Tensor& eps) {
  require_step(s, t, "forward_marginal_clean");
  require_same_shape(x0, eps, "forward_marginal_clean");
  require_finite(x0, "forward_marginal_clean");
  require_finite(eps, "forward_marginal_clean");
  const double a = s.sqrt_alpha_bar(t), d = s.delta(t);
  Tensor out = x0;
  for (std::int64_t i = 0; i < out.size(); ++i)
    out.v[static_cast<std::size_t>(i)] = a * x0.v[static_cast<std::size_t>(i)] + d * eps.v[static_cast<std::size_t>(i)];
  return out;
}

inline Tensor forward_marginal_backdoor(const NoiseSchedule& s, const Tensor& x0_target,
                                        const Tensor& r, int t, const Tensor& eps) {
  require_step(s, t, "forward_marginal_backdoor");
  require_same_shape(x0_target, r, "forward_marginal_backdoor");
  require_same_shape(x0_target, eps, "forward_marginal_backdoor");
  require_finite(x0_target, "forward_marginal_backdoor");
  require_finite(r, "forward_marginal_backdoor");
  require_finite(eps, "forward_marginal_backdoor");
  const double a = s.sqrt_alpha_bar(t), d = s.delta(t);
  Tensor out = x0_target;
  for (std::int64_t i = 0; i < out.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    out.v[k] = a * x0_target.v[k] + (1.0 - a) * r.v[k] + d * eps.v[k];
  }
  return out;
}

inline Tensor transition_clean(const NoiseSchedule& s, const Tensor& x_prev, int t,
                               const Tensor& eps) {
  require_step(s, t, "transition_clean");
  require_same_shape(x_prev, eps, "transition_clean");
  require_finite(x_prev, "transition_clean");
  require_finite(eps, "transition_clean");
  const double g = s.gamma(t), sb = std::sqrt(s.beta(t));
  Tensor out = x_prev;
  for (std::int64_t i = 0; i < out.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    out.v[k] = g * x_prev.v[k] + sb * eps.v[k];
  }
  return out;
}

inline Tensor transition_backdoor(const NoiseSchedule& s, const Tensor& x_prev,
                                  const Tensor& r, int t, const Tensor& eps) {
  require_step(s, t, "transition_backdoor");
  require_same_shape(x_prev, r, "transition_backdoor");
  require_same_shape(x_prev, eps, "transition_backdoor");
  require_finite(x_prev, "transition_backdoor");
  require_finite(r, "transition_backdoor");
  require_finite(eps, "transition_backdoor");
  const double g = s.gamma(t), sb = std::sqrt(s.beta(t));
  Tensor out = x_prev;
  for (std::int64_t i = 0; i < out.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    out.v[k] = g * x_prev.v[k] + (1.0 - g) * r.v[k] + sb * eps.v[k];
  }
  return out;
}

// Recover the eps that generated x_t' from x0' and r under the backdoored
// marginal (r = 0 gives the clean case).
inline Tensor recover_noise(const NoiseSchedule& s, const Tensor& x0_target, const Tensor& r,
                            const Tensor& x_t_prime, int t) {
  require_step(s, t, "recover_noise");
  require_same_shape(x0_target, r, "recover_noise");
  require_same_shape(x0_target, x_t_prime, "recover_noise");
  const double a = s.sqrt_alpha_bar(t), d = s.delta(t);
  Tensor out = x0_target;
  for (std::int64_t i = 0; i < out.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    out.v[k] = (x_t_prime.v[k] - a * x0_target.v[k] - (1.0 - a) * r.v[k]) / d;
  }
  return out;
}

// x0-form posterior coefficients. The three backdoored coefficients
// (on x_t', x0', r) sum to 1 for every t.
inline double posterior_coef_xt(const NoiseSchedule& s, int t) {
  require_posterior_step(s, t, "posterior_coef_xt");
  return s.sqrt_alpha(t) * (1.0 - s.alpha_bar(t - 1)) / (1.0 - s.alpha_bar(t));
}

inline double posterior_coef_x0(const NoiseSchedule& s, int t) {
  require_posterior_step(s, t, "posterior_coef_x0");
  return s.sqrt_alpha_bar(t - 1) * s.beta(t) / (1.0 - s.alpha_bar(t));
}

inline double posterior_coef_r(const NoiseSchedule& s, int t) {
  require_posterior_step(s, t, "posterior_coef_r");
  const double omab = 1.0 - s.alpha_bar(t);
  return s.beta(t) * (1.0 - s.sqrt_alpha_bar(t - 1)) / omab -
         s.sqrt_alpha(t) * (1.0 - s.sqrt_alpha(t)) * (1.0 - s.alpha_bar(t - 1)) / omab;
}

inline Tensor posterior_mean_clean(const NoiseSchedule& s, const Tensor& x_t, const Tensor& x0,
                                   int t) {
  require_posterior_step(s, t, "posterior_mean_clean");
  require_same_shape(x_t, x0, "posterior_mean_clean");
  require_finite(x_t, "posterior_mean_clean");
  require_finite(x0, "posterior_mean_clean");
  const double cxt = posterior_coef_xt(s, t), cx0 = posterior_coef_x0(s, t);
  Tensor out = x_t;
  for (std::int64_t i = 0; i < out.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    out.v[k] = cxt * x_t.v[k] + cx0 * x0.v[k];
  }
  return out;
}

inline Tensor posterior_mean_backdoor(const NoiseSchedule& s, const Tensor& x_t_prime,
                                      const Tensor& x0_prime, const Tensor& r, int t) {
  require_posterior_step(s, t, "posterior_mean_backdoor");
  require_same_shape(x_t_prime, x0_prime, "posterior_mean_backdoor");
  require_same_shape(x_t_prime, r, "posterior_mean_backdoor");
  require_finite(x_t_prime, "posterior_mean_backdoor");
  require_finite(x0_prime, "posterior_mean_backdoor");
  require_finite(r, "posterior_mean_backdoor");
  const double cxt = posterior_coef_xt(s, t), cx0 = posterior_coef_x0(s, t),
               cr = posterior_coef_r(s, t);
  Tensor out = x_t_prime;
  for (std::int64_t i = 0; i < out.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    out.v[k] = cxt * x_t_prime.v[k] + cx0 * x0_prime.v[k] + cr * r.v[k];
  }
  return out;
}

// Eps-reparametrized posterior mean:
//   (1/sqrt(a_t)) (x_t' - rho_t r - (beta_t/delta_t) eps),  rho_t = 1 - sqrt(a_t).
inline Tensor posterior_mean_backdoor_eps_form(const NoiseSchedule& s, const Tensor& x_t_prime,
                                               const Tensor& r, const Tensor& eps, int t) {
  require_posterior_step(s, t, "posterior_mean_backdoor_eps_form");
  require_same_shape(x_t_prime, r, "posterior_mean_backdoor_eps_form");
  require_same_shape(x_t_prime, eps, "posterior_mean_backdoor_eps_form");
  require_finite(x_t_prime, "posterior_mean_backdoor_eps_form");
  require_finite(r, "posterior_mean_backdoor_eps_form");
  require_finite(eps, "posterior_mean_backdoor_eps_form");
  const double inv_sa = 1.0 / s.sqrt_alpha(t), rho = s.rho(t), bd = s.beta(t) / s.delta(t);
  Tensor out = x_t_prime;
  for (std::int64_t i = 0; i < out.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    out.v[k] = inv_sa * (x_t_prime.v[k] - rho * r.v[k] - bd * eps.v[k]);
  }
  return out;
}

inline Tensor posterior_mean_clean_eps_form(const NoiseSchedule& s, const Tensor& x_t,
                                            const Tensor& eps, int t) {
  Tensor r = x_t;
  for (double& x : r.v) x = 0.0;
  return posterior_mean_backdoor_eps_form(s, x_t, r, eps, t);
}

// Posterior variance beta_tilde_t, identical for clean and backdoored chains.
inline double posterior_variance(const NoiseSchedule& s, int t) {
  require_posterior_step(s, t, "posterior_variance");
  return s.beta_tilde(t);
}

// Coefficient on r in the Eq. 10 poisoned regression target,
// rho_t delta_t / (1 - alpha_t); algebraically delta_t / (1 + sqrt(alpha_t)).
inline double regression_r_coef(const NoiseSchedule& s, int t) {
  require_step(s, t, "regression_r_coef");
  return s.rho(t) * s.delta(t) / s.beta(t);  // 1 - alpha_t == beta_t exactly
}

}  // namespace bdlab
