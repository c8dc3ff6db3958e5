#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <optional>

#include "bdlab/sampling.hpp"

using namespace bdlab;

namespace {

DenoiserArch vec_arch() {
  DenoiserArch a;
  a.mode = TensorMode::Vector;
  a.data_dims = {2};
  a.hidden = {8};
  a.time_embed_dim = 4;
  return a;
}

DenoiserParams zero_params(const DenoiserArch& a) {
  DenoiserParams p;
  p.arch = a;
  p.w.assign(static_cast<std::size_t>(a.param_count()), 0.0);
  return p;
}

}  // namespace

// ---- ancestral -----------------------------------------------------------------

TEST(Sampling, AncestralZeroModelReplicatesUpdate) {
  // eps_theta = 0: x <- x/sqrt(alpha_t) + sigma z, z drawn only for t > 1.
  const NoiseSchedule s = NoiseSchedule::linear(3, 0.01, 0.05);
  const DenoiserParams p = zero_params(vec_arch());
  SamplerConfig cfg;
  const Tensor xT = point_target({0.4, -0.2});

  RandomStream r1(9);
  const Tensor got = ancestral_sample(p, s, xT, cfg, r1);

  RandomStream r2(9);
  Tensor x = xT, z = xT;
  for (int t = 3; t >= 1; --t) {
    const double sig = t > 1 ? std::sqrt(s.beta(t)) : 0.0;
    if (t > 1) r2.fill_normal(z.v);
    for (std::size_t i = 0; i < 2; ++i)
      x.v[i] = x.v[i] / s.sqrt_alpha(t) + (t > 1 ? sig * z.v[i] : 0.0);
  }
  EXPECT_DOUBLE_EQ(got.v[0], x.v[0]);
  EXPECT_DOUBLE_EQ(got.v[1], x.v[1]);
}

TEST(Sampling, SingleStepDrawsNoNoise) {
  // T = 1: z is never drawn, so the stream seed is irrelevant.
  const NoiseSchedule s = NoiseSchedule::linear(1, 0.04, 0.04);
  const DenoiserParams p = init_params(vec_arch(), 40);
  const Tensor xT = point_target({0.7, 0.7});
  SamplerConfig cfg;
  RandomStream r1(1), r2(999);
  const Tensor a = ancestral_sample(p, s, xT, cfg, r1);
  const Tensor b = ancestral_sample(p, s, xT, cfg, r2);
  EXPECT_DOUBLE_EQ(a.v[0], b.v[0]);
  EXPECT_DOUBLE_EQ(a.v[1], b.v[1]);
}

TEST(Sampling, SigmaRuleChangesChain) {
  const NoiseSchedule s = NoiseSchedule::linear(10);
  const DenoiserParams p = init_params(vec_arch(), 2);
  const Tensor xT = point_target({0.1, 0.2});
  SamplerConfig beta_cfg, bt_cfg;
  bt_cfg.sigma = SigmaRule::BetaTilde;
  RandomStream r1(5), r2(5);
  const Tensor a = ancestral_sample(p, s, xT, beta_cfg, r1);
  const Tensor b = ancestral_sample(p, s, xT, bt_cfg, r2);
  EXPECT_NE(a.v[0], b.v[0]);
}

// ---- clipped ----------------------------------------------------------------------

TEST(Sampling, ClipInactiveMatchesAncestral) {
  // With bounds wide enough that the clamp never fires, the x0-form update
  // equals the eps-form update algebraically; same seed, same chain.
  const NoiseSchedule s = NoiseSchedule::linear(10);
  const DenoiserParams p = init_params(vec_arch(), 17);
  const Tensor xT = point_target({0.3, -0.5});

  SamplerConfig anc;
  SamplerConfig clip;
  clip.kind = SamplerKind::Clipped;
  clip.clip_lo = -50.0;
  clip.clip_hi = 50.0;

  RandomStream r1(33), r2(33);
  const Tensor a = ancestral_sample(p, s, xT, anc, r1);
  const Tensor c = clipped_sample(p, s, xT, clip, r2);
  EXPECT_NEAR(a.v[0], c.v[0], 1e-10);
  EXPECT_NEAR(a.v[1], c.v[1], 1e-10);

  // Verify the clamp really was inactive along the replayed chain.
  RandomStream r3(33);
  Tensor x = xT, z = xT;
  for (int t = 10; t >= 1; --t) {
    const Tensor eps_hat = predict_noise(p, x, t);
    const double sig = t > 1 ? std::sqrt(s.beta(t)) : 0.0;
    if (t > 1) r3.fill_normal(z.v);
    for (std::size_t i = 0; i < 2; ++i) {
      const double x0_hat = (x.v[i] - s.delta(t) * eps_hat.v[i]) / s.sqrt_alpha_bar(t);
      ASSERT_LT(std::abs(x0_hat), 50.0);
      const double omab = 1.0 - s.alpha_bar(t);
      const double cxt = s.sqrt_alpha(t) * (1.0 - s.alpha_bar(t - 1)) / omab;
      const double cx0 = s.sqrt_alpha_bar(t - 1) * s.beta(t) / omab;
      x.v[i] = cxt * x.v[i] + cx0 * x0_hat + (t > 1 ? sig * z.v[i] : 0.0);
    }
  }
  EXPECT_NEAR(x.v[0], c.v[0], 1e-12);
}

TEST(Sampling, ClippedSingleStepClampsX0) {
  // T = 1, zero model: x0_hat = x_1/sqrt(ab_1) > 1 gets clamped to exactly 1.
  const NoiseSchedule s = NoiseSchedule::linear(1, 0.1, 0.1);
  const DenoiserParams p = zero_params(vec_arch());
  SamplerConfig cfg;
  cfg.kind = SamplerKind::Clipped;
  RandomStream rng2(3);
  Tensor xT = Tensor::vec(2, 2.0);
  const Tensor clipped = clipped_sample(p, s, xT, cfg, rng2);
  EXPECT_DOUBLE_EQ(clipped.v[0], 1.0);
  EXPECT_DOUBLE_EQ(clipped.v[1], 1.0);
  // Ancestral keeps the unclipped magnitude.
  RandomStream rng3(3);
  const Tensor anc = ancestral_sample(p, s, xT, SamplerConfig{}, rng3);
  EXPECT_GT(anc.v[0], 2.0);
}

TEST(Sampling, SignFlipDiverges) {
  const NoiseSchedule s = NoiseSchedule::linear(1, 0.1, 0.1);
  const DenoiserParams p = zero_params(vec_arch());
  SamplerConfig cfg;
  cfg.kind = SamplerKind::Clipped;
  SamplerConfig flip = cfg;
  flip.clip_sign_flip = true;
  Tensor xT = Tensor::vec(2, 2.0);
  RandomStream r1(3), r2(3);
  const Tensor a = clipped_sample(p, s, xT, cfg, r1);
  const Tensor b = clipped_sample(p, s, xT, flip, r2);
  EXPECT_DOUBLE_EQ(a.v[0], 1.0);
  EXPECT_DOUBLE_EQ(b.v[0], -1.0);
}

// ---- ddim -----------------------------------------------------------------------

TEST(Sampling, DdimSubsequence) {
  const auto tau = ddim_subsequence(100, 20);
  ASSERT_EQ(tau.size(), 20u);
  EXPECT_EQ(tau.front(), 5);
  EXPECT_EQ(tau.back(), 100);
  for (std::size_t i = 1; i < tau.size(); ++i) ASSERT_GT(tau[i], tau[i - 1]);

  const auto full = ddim_subsequence(7, 7);
  for (int i = 0; i < 7; ++i) ASSERT_EQ(full[static_cast<std::size_t>(i)], i + 1);

  EXPECT_EQ(ddim_subsequence(50, 1), (std::vector<int>{50}));
  EXPECT_THROW(ddim_subsequence(10, 0), std::invalid_argument);
  EXPECT_THROW(ddim_subsequence(10, 11), std::invalid_argument);
}

TEST(Sampling, DdimZeroModelTelescopes) {
  // eps_theta = 0: every step scales by sqrt(ab_prev/ab_t); the product
  // telescopes to x_T / sqrt(ab_T) regardless of the subsequence.
  const NoiseSchedule s = NoiseSchedule::linear(20);
  const DenoiserParams p = zero_params(vec_arch());
  const Tensor xT = point_target({0.4, -0.6});
  for (int steps : {1, 4, 20}) {
    SamplerConfig cfg;
    cfg.kind = SamplerKind::Ddim;
    cfg.ddim_steps = steps;
    const Tensor out = ddim_sample(p, s, xT, cfg);
    EXPECT_NEAR(out.v[0], 0.4 / s.sqrt_alpha_bar(20), 1e-12) << steps;
    EXPECT_NEAR(out.v[1], -0.6 / s.sqrt_alpha_bar(20), 1e-12) << steps;
  }
}

TEST(Sampling, DdimDeterministic) {
  const NoiseSchedule s = NoiseSchedule::linear(30);
  const DenoiserParams p = init_params(vec_arch(), 8);
  const Tensor xT = point_target({0.9, 0.2});
  SamplerConfig cfg;
  cfg.kind = SamplerKind::Ddim;
  cfg.ddim_steps = 6;
  const Tensor a = ddim_sample(p, s, xT, cfg);
  const Tensor b = ddim_sample(p, s, xT, cfg);
  EXPECT_EQ(a.v, b.v);
}

// ---- latents and batches -----------------------------------------------------------

TEST(Sampling, InitLatentMeansShift) {
  RandomStream rng(606);
  const Trigger tr = coordinate_trigger(2, 0, 0.8);
  double sum0 = 0.0, sum1 = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const Tensor x = init_latent(TensorMode::Vector, {2}, tr, rng);
    sum0 += x.v[0];
    sum1 += x.v[1];
  }
  // Coord 0 centered at g = 0.8, coord 1 at 0; SE = 1/sqrt(n) ~ 0.007.
  EXPECT_NEAR(sum0 / n, 0.8, 4.0 / std::sqrt(static_cast<double>(n)));
  EXPECT_NEAR(sum1 / n, 0.0, 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST(Sampling, InitLatentNoTriggerCentered) {
  RandomStream rng(607);
  double sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i)
    sum += init_latent(TensorMode::Vector, {1}, std::nullopt, rng).v[0];
  EXPECT_NEAR(sum / n, 0.0, 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST(Sampling, BatchDeterministicAndShaped) {
  const NoiseSchedule s = NoiseSchedule::linear(5);
  const DenoiserParams p = init_params(vec_arch(), 3);
  SamplerConfig cfg;
  RandomStream r1(88), r2(88);
  const auto a = sample_batch(p, s, 4, std::nullopt, cfg, r1);
  const auto b = sample_batch(p, s, 4, std::nullopt, cfg, r2);
  ASSERT_EQ(a.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    ASSERT_EQ(a[i].size(), 2);
    ASSERT_EQ(a[i].v, b[i].v);
  }
}

TEST(Sampling, NonFiniteLatentAborts) {
  // Zero model, x multiplied by 1/sqrt(alpha) = sqrt(2) per step: overflows
  // to inf mid-chain and the sampler reports the step.
  const NoiseSchedule s = NoiseSchedule::from_betas({0.5, 0.5, 0.5, 0.5});
  const DenoiserParams p = zero_params(vec_arch());
  SamplerConfig cfg;
  RandomStream rng(1);
  Tensor xT = Tensor::vec(2, 1e308);
  EXPECT_THROW(ancestral_sample(p, s, xT, cfg, rng), std::runtime_error);
}

TEST(Sampling, ConfigValidation) {
  SamplerConfig cfg;
  cfg.clip_lo = 1.0;
  cfg.clip_hi = -1.0;
  EXPECT_THROW(cfg.validate(10), std::invalid_argument);
  SamplerConfig ddim;
  ddim.kind = SamplerKind::Ddim;
  ddim.ddim_steps = 11;
  EXPECT_THROW(ddim.validate(10), std::invalid_argument);
}

TEST(Sampling, ToDisplayMapsAndClamps) {
  Tensor x = Tensor::vec(4);
  x.v = {-1.0, 1.0, 0.0, 3.0};
  const Tensor d = to_display(x);
  EXPECT_DOUBLE_EQ(d.v[0], 0.0);
  EXPECT_DOUBLE_EQ(d.v[1], 1.0);
  EXPECT_DOUBLE_EQ(d.v[2], 0.5);
  EXPECT_DOUBLE_EQ(d.v[3], 1.0);
}
