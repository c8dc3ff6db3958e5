#pragma once
// Verification suites driven by the independent oracles: posterior
// exactness, Monte Carlo process consistency, finite-difference gradient
// checks, and schedule identities. Used by the verify subcommand and the
// acceptance harness.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "diffusion.hpp"
#include "oracle.hpp"
#include "poison.hpp"
#include "rng.hpp"
#include "schedule.hpp"
#include "tensor.hpp"
#include "training.hpp"

namespace bdlab {

struct VerifyResult {
  std::string name;
  bool pass = false;
  double stat = 0.0;  // the max-error style statistic
  std::string detail;
};

// Closed-form backdoored posterior vs joint-Gaussian conditioning, posterior
// variance vs beta_tilde, eps-form consistency, and the coefficient-sum
// identity over randomized cases.
inline std::vector<VerifyResult> verify_posterior(int cases, std::uint64_t seed,
                                                  double mean_tol = 1e-9,
                                                  double ident_tol = 1e-12) {
  RandomStream rng(seed);
  double max_mean_err = 0.0, max_var_err = 0.0, max_form_err = 0.0, max_sum_err = 0.0;
  for (int i = 0; i < cases; ++i) {
    const auto c = oracle::random_case(rng);
    const NoiseSchedule s = NoiseSchedule::from_betas(c.betas);
    const Tensor x0 = Tensor::vec(1, c.x0_prime), r = Tensor::vec(1, c.r),
                 xt = Tensor::vec(1, c.x_t_prime);
    const double closed = posterior_mean_backdoor(s, xt, x0, r, c.t).at(0);
    const auto post = oracle::backdoor_posterior(c.betas, c.t, c.x0_prime, c.r, c.x_t_prime);
    max_mean_err = std::max(max_mean_err, std::abs(closed - post.mean));
    max_var_err = std::max(max_var_err, std::abs(posterior_variance(s, c.t) - post.var));

    const Tensor eps = recover_noise(s, x0, r, xt, c.t);
    const double eps_form = posterior_mean_backdoor_eps_form(s, xt, r, eps, c.t).at(0);
    max_form_err = std::max(max_form_err, std::abs(closed - eps_form));

    const double sum =
        posterior_coef_xt(s, c.t) + posterior_coef_x0(s, c.t) + posterior_coef_r(s, c.t);
    max_sum_err = std::max(max_sum_err, std::abs(sum - 1.0));
  }
  return {
      {"posterior-mean-vs-oracle", max_mean_err <= mean_tol, max_mean_err,
       "max |closed-form - conditioning oracle| over " + std::to_string(cases) + " cases"},
      {"posterior-variance-beta-tilde", max_var_err <= mean_tol, max_var_err,
       "max |beta_tilde - oracle variance| (r-independent)"},
      {"posterior-eps-form-consistency", max_form_err <= ident_tol, max_form_err,
       "max |x0-form - eps-form| under the marginal reparametrization"},
      {"posterior-coefficient-sum", max_sum_err <= ident_tol, max_sum_err,
       "max |c_xt + c_x0 + c_r - 1|"},
  };
}

// Mean/variance of t-fold transition compositions vs the closed-form
// marginal, within z_tol standard errors.
inline std::vector<VerifyResult> verify_marginal_mc(int pairs, std::int64_t draws,
                                                    std::uint64_t seed, double z_tol = 4.0) {
  RandomStream rng(seed);
  double worst_z = 0.0;
  for (int i = 0; i < pairs; ++i) {
    const auto c = oracle::random_case(rng);
    const auto mc = oracle::mc_marginal_check(c.betas, c.x0_prime, c.r, c.t, draws, rng);
    worst_z = std::max({worst_z, std::abs(mc.z_mean), std::abs(mc.z_var)});
  }
  return {{"marginal-mc-consistency", worst_z <= z_tol, worst_z,
           "max |z| over " + std::to_string(pairs) + " (schedule, t) pairs at " +
               std::to_string(draws) + " draws"}};
}

// Analytic gradient of the combined loss vs central finite differences on
// random parameter coordinates, for one batch of frozen draws per mode.
inline std::vector<VerifyResult> verify_gradient(int coords, std::uint64_t seed,
                                                 double rel_tol = 1e-4) {
  RandomStream rng(seed);
  double worst_rel = 0.0;
  int checked = 0;
  for (int pass = 0; pass < 2; ++pass) {
    DenoiserArch arch;
    PoisonSpec spec;
    std::vector<Tensor> data;
    if (pass == 0) {
      arch.mode = TensorMode::Vector;
      arch.data_dims = {2};
      arch.hidden = {12, 12};
      arch.time_embed_dim = 6;
      spec.trigger = coordinate_trigger(2, 0, 0.8);
      spec.target = point_target({-0.8, -0.8});
      for (int i = 0; i < 12; ++i) {
        Tensor x = Tensor::vec(2);
        x.at(0) = rng.uniform(-1.0, 1.0);
        x.at(1) = rng.uniform(-1.0, 1.0);
        data.push_back(std::move(x));
      }
    } else {
      arch.mode = TensorMode::Image;
      arch.data_dims = {5, 5};
      arch.hidden = {14};
      arch.time_embed_dim = 6;
      spec.trigger = corner_box_trigger(5, 5, 2, 1.0);
      spec.target = plus_target(5, 5, 1);
      for (int i = 0; i < 8; ++i) {
        Tensor x = Tensor::image(5, 5);
        for (double& v : x.v) v = rng.uniform(-1.0, 1.0);
        data.push_back(std::move(x));
      }
    }
    const NoiseSchedule s = NoiseSchedule::linear(10, 1e-3, 0.2);
    DenoiserParams params = init_params(arch, derive_seed(seed, "grad-params"));

    // Frozen combined-loss batch: half the samples take the poisoned branch.
    std::vector<Tensor> inputs, targets;
    std::vector<int> timesteps;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const int t = 1 + static_cast<int>(rng.randint(static_cast<std::uint64_t>(s.T())));
      Tensor eps = data[i];
      rng.fill_normal(eps.v);
      auto [input, target] = (i % 2 == 0) ? poisoned_training_example(data[i], spec, s, t, eps)
                                          : clean_training_example(data[i], s, t, eps);
      inputs.push_back(std::move(input));
      targets.push_back(std::move(target));
      timesteps.push_back(t);
    }

    std::vector<double> grad;
    loss_gradient(params, inputs, targets, timesteps, grad);
    for (int k = 0; k < coords / 2; ++k) {
      const auto i = static_cast<std::size_t>(rng.randint(params.w.size()));
      const double h = 1e-5;
      const double fd = oracle::finite_difference_gradient(
          [&](double wi) {
            DenoiserParams p = params;
            p.w[i] = wi;
            return loss_value(p, inputs, targets, timesteps);
          },
          params.w[i], h);
      const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-7});
      worst_rel = std::max(worst_rel, std::abs(fd - grad[i]) / denom);
      ++checked;
    }
  }
  return {{"gradient-finite-difference", worst_rel <= rel_tol, worst_rel,
           "max relative error over " + std::to_string(checked) + " coordinates, both modes"}};
}

// Exact schedule identities on random schedules.
inline std::vector<VerifyResult> verify_identities(int cases, std::uint64_t seed,
                                                   double tol = 1e-12) {
  RandomStream rng(seed);
  double worst = 0.0;
  for (int i = 0; i < cases; ++i) {
    const auto c = oracle::random_case(rng);
    const NoiseSchedule s = NoiseSchedule::from_betas(c.betas);
    for (int t = 1; t <= s.T(); ++t) {
      worst = std::max(worst, std::abs(s.gamma(t) * s.gamma(t) * (1.0 - s.alpha_bar(t - 1)) +
                                       s.beta(t) - (1.0 - s.alpha_bar(t))));
      worst = std::max(worst, std::abs(s.delta(t) * s.delta(t) + s.alpha_bar(t) - 1.0));
      worst = std::max(worst, std::abs(regression_r_coef(s, t) -
                                       s.delta(t) / (1.0 + s.sqrt_alpha(t))));
    }
  }
  return {{"schedule-identities", worst <= tol, worst,
           "max error of gamma/delta/regression-coefficient identities"}};
}

inline bool print_verify_table(std::ostream& os, const std::vector<VerifyResult>& results) {
  bool all = true;
  for (const VerifyResult& r : results) {
    char stat[64];
    std::snprintf(stat, sizeof(stat), "%.3e", r.stat);
    os << (r.pass ? "PASS" : "FAIL") << "  " << r.name << "  max-error " << stat << "  ("
       << r.detail << ")\n";
    all = all && r.pass;
  }
  return all;
}

}  // namespace bdlab
