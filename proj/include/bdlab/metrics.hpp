#pragma once
// Specificity and utility measurement: target MSE, windowed SSIM (display
// space), a feature-free Frechet distance proxy on raw flattened samples,
// and unbiased quadratic kernel MMD with a permutation null.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rng.hpp"
#include "tensor.hpp"

namespace bdlab {

struct MetricsReport {
  std::map<std::string, double> values;
  std::map<std::string, std::int64_t> counts;
  std::map<std::string, std::uint64_t> seeds;

  void validate() const {
    for (const auto& [k, v] : values)
      if (!std::isfinite(v)) throw std::invalid_argument("MetricsReport: non-finite value " + k);
    for (const auto& [k, c] : counts)
      if (c <= 0) throw std::invalid_argument("MetricsReport: non-positive count " + k);
  }
};

// Mean over the batch of per-sample mean squared error to y.
inline double target_mse(const std::vector<Tensor>& samples, const Tensor& y) {
  if (samples.empty()) throw std::invalid_argument("target_mse: empty batch");
  double acc = 0.0;
  for (const Tensor& s : samples) {
    require_same_shape(s, y, "target_mse");
    double e = 0.0;
    for (std::int64_t i = 0; i < s.size(); ++i) {
      const double d = s.v[static_cast<std::size_t>(i)] - y.v[static_cast<std::size_t>(i)];
      e += d * d;
    }
    acc += e / static_cast<double>(s.size());
  }
  return acc / static_cast<double>(samples.size());
}

// Windowed SSIM over display-space [0, 1] images: uniform window of side
// min(8, min(H, W)), stride 1, population moments, K1 = 0.01, K2 = 0.03,
// dynamic range 1.
inline double ssim(const Tensor& a, const Tensor& b) {
  if (a.mode != TensorMode::Image || b.mode != TensorMode::Image)
    throw std::invalid_argument("ssim: unsupported mode (image tensors required)");
  require_same_shape(a, b, "ssim");
  const double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
  const std::int64_t H = a.dims[0], W = a.dims[1];
  const std::int64_t win = std::min<std::int64_t>(8, std::min(H, W));
  const double n = static_cast<double>(win * win);
  double acc = 0.0;
  std::int64_t windows = 0;
  for (std::int64_t r0 = 0; r0 + win <= H; ++r0)
    for (std::int64_t c0 = 0; c0 + win <= W; ++c0) {
      double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
      for (std::int64_t r = r0; r < r0 + win; ++r)
        for (std::int64_t c = c0; c < c0 + win; ++c) {
          const double xa = a.at(r, c), xb = b.at(r, c);
          sa += xa;
          sb += xb;
          saa += xa * xa;
          sbb += xb * xb;
          sab += xa * xb;
        }
      const double ma = sa / n, mb = sb / n;
      const double va = saa / n - ma * ma, vb = sbb / n - mb * mb;
      const double cov = sab / n - ma * mb;
      const double lum = (2.0 * ma * mb + C1) / (ma * ma + mb * mb + C1);
      const double cs = (2.0 * cov + C2) / (va + vb + C2);
      acc += lum * cs;
      ++windows;
    }
  return acc / static_cast<double>(windows);
}

namespace detail {

inline Eigen::MatrixXd stack_samples(const std::vector<Tensor>& set, const char* op) {
  if (set.empty()) throw std::invalid_argument(std::string(op) + ": empty sample set");
  const std::int64_t d = set[0].size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(set.size()), d);
  for (std::size_t i = 0; i < set.size(); ++i) {
    require_same_shape(set[i], set[0], op);
    for (std::int64_t j = 0; j < d; ++j)
      m(static_cast<Eigen::Index>(i), j) = set[i].v[static_cast<std::size_t>(j)];
  }
  return m;
}

// PSD square root via symmetric eigendecomposition; negative eigenvalues
// floored at 0.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

// |mu_a - mu_b|^2 + Tr(Sa + Sb - 2 (Sa^{1/2} Sb Sa^{1/2})^{1/2}) on raw
// flattened samples; covariances regularized by 1e-6 I when a set is not
// larger than the dimension.
inline double frechet_gaussian_distance(const std::vector<Tensor>& set_a,
                                        const std::vector<Tensor>& set_b) {
  const Eigen::MatrixXd A = detail::stack_samples(set_a, "frechet_gaussian_distance");
  const Eigen::MatrixXd B = detail::stack_samples(set_b, "frechet_gaussian_distance");
  if (A.cols() != B.cols())
    throw std::invalid_argument("frechet_gaussian_distance: dimension mismatch");
  const auto d = A.cols();
  const Eigen::VectorXd mu_a = A.colwise().mean(), mu_b = B.colwise().mean();
  const Eigen::MatrixXd Ca = (A.rowwise() - mu_a.transpose()).transpose() *
                             (A.rowwise() - mu_a.transpose()) /
                             std::max<double>(1.0, static_cast<double>(A.rows() - 1));
  const Eigen::MatrixXd Cb = (B.rowwise() - mu_b.transpose()).transpose() *
                             (B.rowwise() - mu_b.transpose()) /
                             std::max<double>(1.0, static_cast<double>(B.rows() - 1));
  Eigen::MatrixXd Sa = Ca, Sb = Cb;
  if (A.rows() <= d || B.rows() <= d) {
    std::cerr << "frechet_gaussian_distance: degenerate sample count, regularizing covariance\n";
    Sa += 1e-6 * Eigen::MatrixXd::Identity(d, d);
    Sb += 1e-6 * Eigen::MatrixXd::Identity(d, d);
  }
  const Eigen::MatrixXd root_a = detail::psd_sqrt(Sa);
  const Eigen::MatrixXd cross = detail::psd_sqrt(root_a * Sb * root_a);
  const double mean_term = (mu_a - mu_b).squaredNorm();
  const double trace_term = Sa.trace() + Sb.trace() - 2.0 * cross.trace();
  return mean_term + trace_term;
}

inline double median_heuristic_bandwidth(const std::vector<Tensor>& set_a,
                                         const std::vector<Tensor>& set_b) {
  std::vector<const Tensor*> pool;
  for (const Tensor& t : set_a) pool.push_back(&t);
  for (const Tensor& t : set_b) pool.push_back(&t);
  if (pool.size() < 2) throw std::invalid_argument("median_heuristic_bandwidth: need >= 2 samples");
  std::vector<double> dist;
  dist.reserve(pool.size() * (pool.size() - 1) / 2);
  for (std::size_t i = 0; i < pool.size(); ++i)
    for (std::size_t j = i + 1; j < pool.size(); ++j) {
      double s = 0.0;
      for (std::int64_t k = 0; k < pool[i]->size(); ++k) {
        const double d = pool[i]->v[static_cast<std::size_t>(k)] - pool[j]->v[static_cast<std::size_t>(k)];
        s += d * d;
      }
      dist.push_back(std::sqrt(s));
    }
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2), dist.end());
  const double med = dist[dist.size() / 2];
  return med > 0.0 ? med : 1.0;
}

// Unbiased quadratic MMD^2 with a Gaussian kernel (may be slightly
// negative; raw value returned).
inline double kernel_mmd(const std::vector<Tensor>& set_a, const std::vector<Tensor>& set_b,
                         double bandwidth) {
  if (!(bandwidth > 0.0)) throw std::invalid_argument("kernel_mmd: bandwidth must be positive");
  if (set_a.size() < 2 || set_b.size() < 2)
    throw std::invalid_argument("kernel_mmd: need >= 2 samples per set");
  const double gamma = 1.0 / (2.0 * bandwidth * bandwidth);
  auto kern = [&](const Tensor& x, const Tensor& y) {
    double s = 0.0;
    for (std::int64_t k = 0; k < x.size(); ++k) {
      const double d = x.v[static_cast<std::size_t>(k)] - y.v[static_cast<std::size_t>(k)];
      s += d * d;
    }
    return std::exp(-gamma * s);
  };
  const double m = static_cast<double>(set_a.size()), n = static_cast<double>(set_b.size());
  double kaa = 0.0, kbb = 0.0, kab = 0.0;
  for (std::size_t i = 0; i < set_a.size(); ++i)
    for (std::size_t j = 0; j < set_a.size(); ++j)
      if (i != j) kaa += kern(set_a[i], set_a[j]);
  for (std::size_t i = 0; i < set_b.size(); ++i)
    for (std::size_t j = 0; j < set_b.size(); ++j)
      if (i != j) kbb += kern(set_b[i], set_b[j]);
  for (const Tensor& x : set_a)
    for (const Tensor& y : set_b) kab += kern(x, y);
  return kaa / (m * (m - 1.0)) + kbb / (n * (n - 1.0)) - 2.0 * kab / (m * n);
}

struct MmdNull {
  double mmd = 0.0;        // observed unbiased MMD^2 (raw)
  double z = 0.0;          // z-score against the permutation null
  std::int64_t used_a = 0;
  std::int64_t used_b = 0;
};

// Permutation z-score on a capped subsample with a precomputed kernel
// matrix. Subsampling and label permutations both come from rng.
inline MmdNull mmd_permutation_z(const std::vector<Tensor>& set_a,
                                 const std::vector<Tensor>& set_b, double bandwidth,
                                 int n_permutations, RandomStream& rng,
                                 std::int64_t cap = 512) {
  if (!(bandwidth > 0.0)) throw std::invalid_argument("mmd_permutation_z: bandwidth must be positive");
  if (n_permutations < 10) throw std::invalid_argument("mmd_permutation_z: need >= 10 permutations");
  auto subsample = [&](const std::vector<Tensor>& set) {
    std::vector<std::size_t> idx(set.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (static_cast<std::int64_t>(set.size()) > cap) rng.shuffle(idx);
    const std::size_t take = std::min<std::size_t>(set.size(), static_cast<std::size_t>(cap));
    std::vector<const Tensor*> out(take);
    for (std::size_t i = 0; i < take; ++i) out[i] = &set[idx[i]];
    return out;
  };
  const auto a = subsample(set_a), b = subsample(set_b);
  const std::size_t m = a.size(), n = b.size(), N = m + n;
  if (m < 2 || n < 2) throw std::invalid_argument("mmd_permutation_z: need >= 2 samples per set");

  std::vector<const Tensor*> pool(a);
  pool.insert(pool.end(), b.begin(), b.end());
  const double gamma = 1.0 / (2.0 * bandwidth * bandwidth);
  std::vector<double> K(N * N, 1.0);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = i + 1; j < N; ++j) {
      double s = 0.0;
      for (std::int64_t k = 0; k < pool[i]->size(); ++k) {
        const double d = pool[i]->v[static_cast<std::size_t>(k)] - pool[j]->v[static_cast<std::size_t>(k)];
        s += d * d;
      }
      K[i * N + j] = K[j * N + i] = std::exp(-gamma * s);
    }
  auto mmd_of = [&](const std::vector<std::size_t>& labels) {
    double kaa = 0.0, kbb = 0.0, kab = 0.0;
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < N; ++j) {
        if (i == j) continue;
        const bool ia = labels[i] < m, ja = labels[j] < m;
        const double k = K[i * N + j];
        if (ia && ja) kaa += k;
        else if (!ia && !ja) kbb += k;
        else if (ia && !ja) kab += k;
      }
    const double md = static_cast<double>(m), nd = static_cast<double>(n);
    return kaa / (md * (md - 1.0)) + kbb / (nd * (nd - 1.0)) - 2.0 * kab / (md * nd);
  };
  std::vector<std::size_t> labels(N);
  for (std::size_t i = 0; i < N; ++i) labels[i] = i;
  MmdNull out;
  out.mmd = mmd_of(labels);
  out.used_a = static_cast<std::int64_t>(m);
  out.used_b = static_cast<std::int64_t>(n);
  double sum = 0.0, sumsq = 0.0;
  for (int p = 0; p < n_permutations; ++p) {
    rng.shuffle(labels);
    const double v = mmd_of(labels);
    sum += v;
    sumsq += v * v;
  }
  const double np = static_cast<double>(n_permutations);
  const double mean = sum / np;
  const double var = std::max(0.0, (sumsq - np * mean * mean) / (np - 1.0));
  out.z = var > 0.0 ? (out.mmd - mean) / std::sqrt(var) : 0.0;
  return out;
}

}  // namespace bdlab
