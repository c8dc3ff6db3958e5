#pragma once
// Independent ground-truth machinery: textbook joint-Gaussian conditioning
// for posterior checks, Monte Carlo marginal checks, and finite-difference
// gradients. Deliberately shares no arithmetic with diffusion.hpp — alpha-bar
// products and all coefficients are recomputed from raw betas here.

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "rng.hpp"

namespace bdlab::oracle {

struct Gaussian1D {
  double mean = 0.0;
  double var = 1.0;
};

// Exact posterior of x_{t-1}' given x_t' when
//   x_{t-1}' ~ prior,  x_t' | x_{t-1}' ~ N(drift x_{t-1}' + shift, noise_var).
inline Gaussian1D condition_pair(Gaussian1D prior, double drift, double shift,
                                 double noise_var, double observed) {
  if (!(prior.var > 0.0) || !(noise_var > 0.0))
    throw std::invalid_argument("condition_pair: variances must be positive");
  const double s = drift * drift * prior.var + noise_var;
  const double gain = drift * prior.var / s;
  Gaussian1D post;
  post.mean = prior.mean + gain * (observed - (drift * prior.mean + shift));
  post.var = prior.var - drift * prior.var * gain;
  return post;
}

inline double product_alpha_bar(const std::vector<double>& betas, int t) {
  double ab = 1.0;
  for (int i = 0; i < t; ++i) ab *= 1.0 - betas[static_cast<std::size_t>(i)];
  return ab;
}

// Posterior of the backdoored chain at step t from raw betas: prior is the
// Eq. 6 marginal at t-1, likelihood is the Eq. 7 transition.
inline Gaussian1D backdoor_posterior(const std::vector<double>& betas, int t, double x0_prime,
                                     double r, double x_t_prime) {
  if (t < 2 || t > static_cast<int>(betas.size()))
    throw std::invalid_argument("backdoor_posterior: need 2 <= t <= T");
  const double ab_prev = product_alpha_bar(betas, t - 1);
  const double sab_prev = std::sqrt(ab_prev);
  Gaussian1D prior;
  prior.mean = sab_prev * x0_prime + (1.0 - sab_prev) * r;
  prior.var = 1.0 - ab_prev;
  const double beta_t = betas[static_cast<std::size_t>(t - 1)];
  const double gamma_t = std::sqrt(1.0 - beta_t);
  return condition_pair(prior, gamma_t, (1.0 - gamma_t) * r, beta_t, x_t_prime);
}

struct McCheck {
  double mean = 0.0;
  double var = 0.0;
  double z_mean = 0.0;
  double z_var = 0.0;
};

// Compose t transitions from x0' n times and compare the empirical mean and
// variance against the closed-form marginal. z-scores use standard errors
// SE(mean) = sigma/sqrt(n) and SE(var) ~ var sqrt(2/(n-1)).
inline McCheck mc_marginal_check(const std::vector<double>& betas, double x0_prime, double r,
                                 int t, std::int64_t n, RandomStream& rng) {
  if (n < 2) throw std::invalid_argument("mc_marginal_check: n too small");
  if (t < 1 || t > static_cast<int>(betas.size()))
    throw std::invalid_argument("mc_marginal_check: t outside [1, T]");
  double sum = 0.0, sumsq = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    double x = x0_prime;
    for (int k = 1; k <= t; ++k) {
      const double beta_k = betas[static_cast<std::size_t>(k - 1)];
      const double gamma_k = std::sqrt(1.0 - beta_k);
      x = gamma_k * x + (1.0 - gamma_k) * r + std::sqrt(beta_k) * rng.normal();
    }
    sum += x;
    sumsq += x * x;
  }
  const double nd = static_cast<double>(n);
  McCheck out;
  out.mean = sum / nd;
  out.var = (sumsq - nd * out.mean * out.mean) / (nd - 1.0);
  const double ab = product_alpha_bar(betas, t);
  const double sab = std::sqrt(ab);
  const double true_mean = sab * x0_prime + (1.0 - sab) * r;
  const double true_var = 1.0 - ab;
  out.z_mean = (out.mean - true_mean) / std::sqrt(true_var / nd);
  out.z_var = (out.var - true_var) / (true_var * std::sqrt(2.0 / (nd - 1.0)));
  return out;
}

inline double finite_difference_gradient(const std::function<double(double)>& loss_of_coord,
                                         double x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_difference_gradient: h must be positive");
  return (loss_of_coord(x + h) - loss_of_coord(x - h)) / (2.0 * h);
}

struct RandomCase {
  std::vector<double> betas;
  int t = 2;
  double x0_prime = 0.0;
  double r = 0.0;
  double x_t_prime = 0.0;
};

// Schedules with T in {2..50}, beta endpoints log-uniform in [1e-4, 0.3],
// scalar states uniform in [-3, 3].
inline RandomCase random_case(RandomStream& rng) {
  RandomCase c;
  const int T = 2 + static_cast<int>(rng.randint(49));
  double b0 = std::exp(rng.uniform(std::log(1e-4), std::log(0.3)));
  double b1 = std::exp(rng.uniform(std::log(1e-4), std::log(0.3)));
  c.betas.resize(static_cast<std::size_t>(T));
  for (int i = 0; i < T; ++i)
    c.betas[static_cast<std::size_t>(i)] =
        T == 1 ? b0 : b0 + (b1 - b0) * static_cast<double>(i) / (T - 1);
  c.t = 2 + static_cast<int>(rng.randint(static_cast<std::uint64_t>(T - 1)));
  c.x0_prime = rng.uniform(-3.0, 3.0);
  c.r = rng.uniform(-3.0, 3.0);
  c.x_t_prime = rng.uniform(-3.0, 3.0);
  return c;
}

}  // namespace bdlab::oracle
