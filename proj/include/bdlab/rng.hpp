#pragma once
// Deterministic random streams with a pinned draw sequence (the standard
// library's distributions are not bit-portable) plus FNV-1a seed derivation
// for named substreams.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace bdlab {

inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

// Child seed for a named substream: FNV-1a over the label then the
// little-endian master seed bytes. Stage order never shifts any stream.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
  std::uint64_t h = fnv1a64(label.data(), label.size());
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((master >> (8 * i)) & 0xff);
  return fnv1a64(b, 8, h);
}

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : eng_(seed) {}

  // Uniform on [0, 1) with 53-bit resolution.
  double u01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

  // Box-Muller with the second draw of each pair cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = u01();
    while (u1 <= 0.0) u1 = u01();
    const double u2 = u01();
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * std::numbers::pi * u2;
    spare_ = rad * std::sin(ang);
    has_spare_ = true;
    return rad * std::cos(ang);
  }

  // Uniform on {0, ..., n-1}.
  std::uint64_t randint(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("randint: n must be positive");
    auto k = static_cast<std::uint64_t>(u01() * static_cast<double>(n));
    return k >= n ? n - 1 : k;
  }

  void fill_normal(std::vector<double>& out) {
    for (double& x : out) x = normal();
  }

  // In-place Fisher-Yates.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(randint(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace bdlab
