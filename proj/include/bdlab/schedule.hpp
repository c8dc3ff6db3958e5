#pragma once
// Noise schedule: beta_t and every derived constant the processes use,
// precomputed once. Index convention: arrays run t = 0..T with t = 0 a
// placeholder except alpha_bar[0] = 1 (empty product), which makes
// beta_tilde[1] = 0.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace bdlab {

class NoiseSchedule {
 public:
  static NoiseSchedule from_betas(const std::vector<double>& betas) {
    if (betas.empty()) throw std::invalid_argument("schedule: T must be >= 1");
    for (double b : betas)
      if (!(b > 0.0 && b < 1.0))
        throw std::invalid_argument("schedule: betas must lie in (0, 1)");
    return NoiseSchedule(betas);
  }

  static NoiseSchedule linear(int T, double beta_start = 1e-4, double beta_end = 0.02) {
    if (T < 1) throw std::invalid_argument("schedule: T must be >= 1");
    std::vector<double> betas(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t)
      betas[static_cast<std::size_t>(t)] =
          T == 1 ? beta_start
                 : beta_start + (beta_end - beta_start) * static_cast<double>(t) / (T - 1);
    return from_betas(betas);
  }

  int T() const { return T_; }

  double beta(int t) const { return at1(beta_, t, "beta"); }
  double alpha(int t) const { return at1(alpha_, t, "alpha"); }
  double gamma(int t) const { return at1(gamma_, t, "gamma"); }           // sqrt(1 - beta_t)
  double sqrt_alpha(int t) const { return at1(sqrt_alpha_, t, "sqrt_alpha"); }
  double delta(int t) const { return at1(delta_, t, "delta"); }           // sqrt(1 - alpha_bar_t)
  double rho(int t) const { return at1(rho_, t, "rho"); }                 // 1 - sqrt(alpha_t)
  double beta_tilde(int t) const { return at1(beta_tilde_, t, "beta_tilde"); }

  // alpha_bar is meaningful at t = 0 (empty product = 1).
  double alpha_bar(int t) const { return at0(alpha_bar_, t, "alpha_bar"); }
  double sqrt_alpha_bar(int t) const { return at0(sqrt_alpha_bar_, t, "sqrt_alpha_bar"); }

 private:
  explicit NoiseSchedule(const std::vector<double>& betas)
      : T_(static_cast<int>(betas.size())) {
    const std::size_t n = betas.size() + 1;
    beta_.assign(n, 0.0);
    alpha_.assign(n, 0.0);
    gamma_.assign(n, 0.0);
    sqrt_alpha_.assign(n, 0.0);
    alpha_bar_.assign(n, 0.0);
    sqrt_alpha_bar_.assign(n, 0.0);
    delta_.assign(n, 0.0);
    rho_.assign(n, 0.0);
    beta_tilde_.assign(n, 0.0);

    alpha_bar_[0] = 1.0;
    sqrt_alpha_bar_[0] = 1.0;
    for (std::size_t t = 1; t < n; ++t) {
      beta_[t] = betas[t - 1];
      alpha_[t] = 1.0 - beta_[t];
      gamma_[t] = std::sqrt(alpha_[t]);
      sqrt_alpha_[t] = gamma_[t];
      alpha_bar_[t] = alpha_bar_[t - 1] * alpha_[t];
      if (!(alpha_bar_[t] > 0.0 && alpha_bar_[t] < alpha_bar_[t - 1]))
        throw std::invalid_argument("schedule: alpha_bar must be positive and strictly decreasing");
      sqrt_alpha_bar_[t] = std::sqrt(alpha_bar_[t]);
      delta_[t] = std::sqrt(1.0 - alpha_bar_[t]);
      rho_[t] = beta_[t] / (1.0 + gamma_[t]);  // == 1 - sqrt(alpha_t), stable for small beta
      beta_tilde_[t] = (1.0 - alpha_bar_[t - 1]) / (1.0 - alpha_bar_[t]) * beta_[t];
    }
  }

  double at1(const std::vector<double>& a, int t, const char* name) const {
    if (t < 1 || t > T_)
      throw std::out_of_range(std::string("schedule: ") + name + " needs 1 <= t <= T");
    return a[static_cast<std::size_t>(t)];
  }
  double at0(const std::vector<double>& a, int t, const char* name) const {
    if (t < 0 || t > T_)
      throw std::out_of_range(std::string("schedule: ") + name + " needs 0 <= t <= T");
    return a[static_cast<std::size_t>(t)];
  }

  int T_;
  std::vector<double> beta_, alpha_, gamma_, sqrt_alpha_, alpha_bar_, sqrt_alpha_bar_,
      delta_, rho_, beta_tilde_;
};

}  // namespace bdlab
