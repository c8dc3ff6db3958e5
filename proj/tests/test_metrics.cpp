#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "bdlab/metrics.hpp"
#include "bdlab/poison.hpp"
#include "bdlab/rng.hpp"

using namespace bdlab;

namespace {

std::vector<Tensor> gaussian_cloud(int n, double mean0, double mean1, double sd,
                                   std::uint64_t seed) {
  RandomStream rng(seed);
  std::vector<Tensor> out;
  for (int i = 0; i < n; ++i) {
    Tensor x = Tensor::vec(2);
    x.v[0] = mean0 + sd * rng.normal();
    x.v[1] = mean1 + sd * rng.normal();
    out.push_back(x);
  }
  return out;
}

std::vector<Tensor> translated(const std::vector<Tensor>& set, double d0, double d1) {
  std::vector<Tensor> out = set;
  for (Tensor& t : out) {
    t.v[0] += d0;
    t.v[1] += d1;
  }
  return out;
}

std::vector<Tensor> rotated(const std::vector<Tensor>& set, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  std::vector<Tensor> out = set;
  for (Tensor& t : out) {
    const double x = t.v[0], y = t.v[1];
    t.v[0] = c * x - s * y;
    t.v[1] = s * x + c * y;
  }
  return out;
}

}  // namespace

// ---- target_mse ---------------------------------------------------------------

TEST(Metrics, TargetMseBasics) {
  const Tensor y = point_target({0.5, -0.5});
  EXPECT_DOUBLE_EQ(target_mse({y, y, y}, y), 0.0);
  // {y, y + 2c}: per-sample MSEs are 0 and 4c^2, mean 2c^2.
  const double c = 0.3;
  Tensor shifted = y;
  for (double& v : shifted.v) v += 2.0 * c;
  EXPECT_NEAR(target_mse({y, shifted}, y), 2.0 * c * c, 1e-15);
}

TEST(Metrics, TargetMsePermutationInvariant) {
  RandomStream rng(12);
  std::vector<Tensor> samples;
  for (int i = 0; i < 5; ++i) {
    Tensor x = Tensor::vec(3);
    rng.fill_normal(x.v);
    samples.push_back(x);
  }
  const Tensor y = Tensor::vec(3, 0.2);
  const double a = target_mse(samples, y);
  std::vector<Tensor> rev(samples.rbegin(), samples.rend());
  EXPECT_DOUBLE_EQ(target_mse(rev, y), a);
}

TEST(Metrics, TargetMseErrors) {
  const Tensor y = Tensor::vec(2);
  EXPECT_THROW(target_mse({}, y), std::invalid_argument);
  EXPECT_THROW(target_mse({Tensor::vec(3)}, y), std::invalid_argument);
}

// ---- ssim -------------------------------------------------------------------------

TEST(Metrics, SsimIdentity) {
  RandomStream rng(3);
  Tensor a = Tensor::image(12, 12);
  for (double& v : a.v) v = rng.u01();
  EXPECT_DOUBLE_EQ(ssim(a, a), 1.0);
}

TEST(Metrics, SsimConstantFieldsNearZero) {
  // 0-field vs 1-field: luminance C1/(1 + C1), contrast/structure 1.
  const Tensor zero = Tensor::image(8, 8, 0.0), one = Tensor::image(8, 8, 1.0);
  const double v = ssim(zero, one);
  const double want = 1e-4 / (1.0 + 1e-4);
  EXPECT_NEAR(v, want, 1e-15);
  EXPECT_LT(v, 0.05);
}

TEST(Metrics, SsimCheckerboardNegative) {
  Tensor a = Tensor::image(8, 8), b = Tensor::image(8, 8);
  for (std::int64_t r = 0; r < 8; ++r)
    for (std::int64_t c = 0; c < 8; ++c) {
      a.at(r, c) = ((r + c) % 2 == 0) ? 1.0 : 0.0;
      b.at(r, c) = 1.0 - a.at(r, c);
    }
  const double v = ssim(a, b);
  // Single window: lum = 1 exactly, cs = (-0.5 + C2)/(0.5 + C2).
  const double want = (2.0 * -0.25 + 0.0009) / (0.25 + 0.25 + 0.0009);
  EXPECT_NEAR(v, want, 1e-15);
  EXPECT_LT(v, -0.99);
}

TEST(Metrics, SsimSymmetric) {
  RandomStream rng(9);
  Tensor a = Tensor::image(10, 12), b = Tensor::image(10, 12);
  for (double& v : a.v) v = rng.u01();
  for (double& v : b.v) v = rng.u01();
  EXPECT_DOUBLE_EQ(ssim(a, b), ssim(b, a));
}

TEST(Metrics, SsimSmallImagesUseSmallerWindow) {
  const Tensor a = Tensor::image(4, 4, 0.3), b = Tensor::image(4, 4, 0.3);
  EXPECT_DOUBLE_EQ(ssim(a, b), 1.0);
}

TEST(Metrics, SsimRejectsVectors) {
  EXPECT_THROW(ssim(Tensor::vec(4), Tensor::vec(4)), std::invalid_argument);
  EXPECT_THROW(ssim(Tensor::image(4, 4), Tensor::image(4, 5)), std::invalid_argument);
}

// ---- frechet proxy ---------------------------------------------------------------

TEST(Metrics, FrechetIdenticalSetsZero) {
  const auto a = gaussian_cloud(200, 0.0, 0.0, 1.0, 5);
  EXPECT_NEAR(frechet_gaussian_distance(a, a), 0.0, 1e-9);
}

TEST(Metrics, FrechetMeanSeparation) {
  // Same points shifted by (3, 4): trace term cancels, FD = 25.
  const auto a = gaussian_cloud(300, 0.0, 0.0, 0.7, 6);
  const auto b = translated(a, 3.0, 4.0);
  EXPECT_NEAR(frechet_gaussian_distance(a, b), 25.0, 1e-9);
}

TEST(Metrics, FrechetScaledIsotropicGaussians) {
  // N(0, I) vs N(0, 4 I) in 2-d: per-dim (1 - 2)^2, total 2.
  const auto a = gaussian_cloud(6000, 0.0, 0.0, 1.0, 7);
  const auto b = gaussian_cloud(6000, 0.0, 0.0, 2.0, 8);
  EXPECT_NEAR(frechet_gaussian_distance(a, b), 2.0, 0.25);
}

TEST(Metrics, FrechetTranslationInvariance) {
  const auto a = gaussian_cloud(150, 0.2, -0.1, 1.0, 9);
  const auto b = gaussian_cloud(150, 1.0, 0.5, 0.5, 10);
  const double base = frechet_gaussian_distance(a, b);
  EXPECT_NEAR(frechet_gaussian_distance(translated(a, 2.5, -1.0), translated(b, 2.5, -1.0)),
              base, 1e-9);
}

TEST(Metrics, FrechetRotationInvariance) {
  const auto a = gaussian_cloud(150, 0.2, -0.1, 1.0, 11);
  const auto b = gaussian_cloud(150, 1.0, 0.5, 0.5, 12);
  const double base = frechet_gaussian_distance(a, b);
  EXPECT_NEAR(frechet_gaussian_distance(rotated(a, 0.7), rotated(b, 0.7)), base, 1e-8);
}

TEST(Metrics, FrechetSymmetric) {
  const auto a = gaussian_cloud(120, 0.0, 0.0, 1.0, 13);
  const auto b = gaussian_cloud(140, 0.4, 0.0, 1.3, 14);
  EXPECT_NEAR(frechet_gaussian_distance(a, b), frechet_gaussian_distance(b, a), 1e-9);
}

TEST(Metrics, FrechetRegularizesSmallSets) {
  // n <= dim triggers the covariance regularization warning path.
  const auto a = gaussian_cloud(2, 0.0, 0.0, 1.0, 15);
  const auto b = gaussian_cloud(50, 0.0, 0.0, 1.0, 16);
  testing::internal::CaptureStderr();
  const double v = frechet_gaussian_distance(a, b);
  const std::string err = testing::internal::GetCapturedStderr();
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NE(err.find("regulariz"), std::string::npos);
}

// ---- mmd ----------------------------------------------------------------------------

TEST(Metrics, MmdPairedSetsNearZero) {
  const auto a = gaussian_cloud(200, 0.0, 0.0, 1.0, 17);
  EXPECT_LT(std::abs(kernel_mmd(a, a, 1.0)), 0.05);
}

TEST(Metrics, MmdFarPointMasses) {
  const std::vector<Tensor> a(100, point_target({0.0, 0.0}));
  const std::vector<Tensor> b(100, point_target({100.0, 0.0}));
  EXPECT_NEAR(kernel_mmd(a, b, 1.0), 2.0, 1e-12);
}

TEST(Metrics, MmdFlatKernelLimit) {
  const auto a = gaussian_cloud(50, 0.0, 0.0, 1.0, 18);
  const auto b = gaussian_cloud(50, 3.0, 0.0, 1.0, 19);
  EXPECT_LT(std::abs(kernel_mmd(a, b, 1e9)), 1e-12);
}

TEST(Metrics, MmdErrors) {
  const auto a = gaussian_cloud(5, 0.0, 0.0, 1.0, 20);
  EXPECT_THROW(kernel_mmd(a, a, 0.0), std::invalid_argument);
  EXPECT_THROW(kernel_mmd(a, a, -1.0), std::invalid_argument);
  const std::vector<Tensor> one(1, point_target({0.0, 0.0}));
  EXPECT_THROW(kernel_mmd(one, a, 1.0), std::invalid_argument);
}

TEST(Metrics, MedianHeuristic) {
  const std::vector<Tensor> two = {point_target({0.0}), point_target({1.0})};
  EXPECT_DOUBLE_EQ(median_heuristic_bandwidth(two, {}), 1.0);
  // Identical points: degenerate median 0 falls back to 1.
  const std::vector<Tensor> same(4, point_target({0.5}));
  EXPECT_DOUBLE_EQ(median_heuristic_bandwidth(same, {}), 1.0);
  const std::vector<Tensor> three = {point_target({0.0}), point_target({1.0}),
                                     point_target({3.0})};
  EXPECT_DOUBLE_EQ(median_heuristic_bandwidth(three, {}), 2.0);
}

TEST(Metrics, PermutationZSeparatesDistributions) {
  const auto a = gaussian_cloud(60, 0.0, 0.0, 0.3, 21);
  const auto b = gaussian_cloud(60, 3.0, 0.0, 0.3, 22);
  const double bw = median_heuristic_bandwidth(a, b);
  RandomStream rng(23);
  const MmdNull res = mmd_permutation_z(a, b, bw, 100, rng);
  EXPECT_GT(res.z, 3.0);
  EXPECT_GT(res.mmd, 0.1);
  EXPECT_EQ(res.used_a, 60);
  EXPECT_EQ(res.used_b, 60);
}

TEST(Metrics, PermutationZNullCalibrated) {
  const auto a = gaussian_cloud(60, 0.0, 0.0, 1.0, 24);
  const auto b = gaussian_cloud(60, 0.0, 0.0, 1.0, 25);
  RandomStream rng(26);
  const MmdNull res = mmd_permutation_z(a, b, median_heuristic_bandwidth(a, b), 100, rng);
  EXPECT_LT(std::abs(res.z), 6.0);
}

TEST(Metrics, PermutationZRespectsCap) {
  const auto a = gaussian_cloud(40, 0.0, 0.0, 1.0, 27);
  const auto b = gaussian_cloud(40, 0.0, 0.0, 1.0, 28);
  RandomStream rng(29);
  const MmdNull res = mmd_permutation_z(a, b, 1.0, 20, rng, 8);
  EXPECT_EQ(res.used_a, 8);
  EXPECT_EQ(res.used_b, 8);
  EXPECT_THROW(mmd_permutation_z(a, b, 1.0, 5, rng), std::invalid_argument);
}

// ---- report ---------------------------------------------------------------------------

TEST(Metrics, ReportValidation) {
  MetricsReport rep;
  rep.values["mse"] = 0.5;
  rep.counts["samples"] = 10;
  EXPECT_NO_THROW(rep.validate());
  rep.values["bad"] = std::nan("");
  EXPECT_THROW(rep.validate(), std::invalid_argument);
  rep.values.erase("bad");
  rep.counts["bad"] = 0;
  EXPECT_THROW(rep.validate(), std::invalid_argument);
}
