#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "bdlab/rng.hpp"
#include "bdlab/tensor.hpp"

using namespace bdlab;

TEST(Rng, SameSeedSameSequence) {
  RandomStream a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    ASSERT_EQ(a.u01(), b.u01());
    ASSERT_EQ(a.normal(), b.normal());
  }
}

TEST(Rng, U01Range) {
  RandomStream rng(7);
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.u01();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Rng, NormalMoments) {
  RandomStream rng(123);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  EXPECT_NEAR(mean, 0.0, 4.0 / std::sqrt(static_cast<double>(n)));
  EXPECT_NEAR(var, 1.0, 4.0 * std::sqrt(2.0 / n));
}

TEST(Rng, RandintBounds) {
  RandomStream rng(9);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 10000; ++i) {
    const auto k = rng.randint(7);
    ASSERT_LT(k, 7u);
    seen.insert(k);
  }
  EXPECT_EQ(seen.size(), 7u);
  EXPECT_THROW(rng.randint(0), std::invalid_argument);
}

TEST(Rng, ShuffleIsPermutation) {
  RandomStream rng(5);
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  rng.shuffle(v);
  std::set<int> s(v.begin(), v.end());
  EXPECT_EQ(s.size(), 10u);
}

TEST(Rng, DeriveSeedLabelsDiffer) {
  const auto a = derive_seed(1, "train");
  const auto b = derive_seed(1, "sample.clean");
  const auto c = derive_seed(2, "train");
  EXPECT_NE(a, b);
  EXPECT_NE(a, c);
  EXPECT_EQ(a, derive_seed(1, "train"));
}

TEST(Tensor, Construction) {
  Tensor v = Tensor::vec(3, 0.5);
  EXPECT_EQ(v.size(), 3);
  EXPECT_EQ(v.mode, TensorMode::Vector);
  Tensor img = Tensor::image(4, 5, -1.0);
  EXPECT_EQ(img.size(), 20);
  EXPECT_EQ(img.at(3, 4), -1.0);
  EXPECT_THROW(Tensor(TensorMode::Vector, {2, 2}), std::invalid_argument);
  EXPECT_THROW(Tensor(TensorMode::Image, {0, 4}), std::invalid_argument);
}

TEST(Tensor, ShapeAndFiniteChecks) {
  Tensor a = Tensor::vec(2), b = Tensor::vec(3);
  EXPECT_FALSE(same_shape(a, b));
  EXPECT_THROW(require_same_shape(a, b, "op"), std::invalid_argument);
  a.at(0) = std::nan("");
  EXPECT_THROW(require_finite(a, "op"), std::invalid_argument);
}
