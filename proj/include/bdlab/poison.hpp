#pragma once
// Trigger/mask/target representation, the poisoned-sample stamp
// r = M .* g + (1 - M) .* x, and the deterministic dataset split.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "rng.hpp"
#include "tensor.hpp"

namespace bdlab {

struct Trigger {
  Tensor pattern;  // g, canonicalized to 0 wherever mask = 0
  Tensor mask;     // M, strictly binary

  Trigger() = default;
  Trigger(Tensor g, Tensor M) : pattern(std::move(g)), mask(std::move(M)) {
    require_same_shape(pattern, mask, "Trigger");
    require_finite(pattern, "Trigger");
    for (double m : mask.v)
      if (m != 0.0 && m != 1.0)
        throw std::invalid_argument("Trigger: mask must be strictly binary");
    for (std::int64_t i = 0; i < pattern.size(); ++i) {
      const auto k = static_cast<std::size_t>(i);
      if (mask.v[k] == 0.0) pattern.v[k] = 0.0;
    }
  }
};

struct PoisonSpec {
  Trigger trigger;
  Tensor target;  // y
  double rate = 0.0;
  std::uint64_t split_seed = 0;
  // When true, poisoned samples also stay in the clean branch (the
  // overlap reading of the loss's dataset notation); default is the
  // disjoint partition.
  bool overlap = false;

  void validate() const {
    if (!(rate >= 0.0 && rate <= 1.0))
      throw std::invalid_argument("PoisonSpec: rate must lie in [0, 1]");
    require_finite(target, "PoisonSpec");
    for (double y : target.v)
      if (y < -1.0 || y > 1.0)
        throw std::invalid_argument("PoisonSpec: target must lie in [-1, 1]");
  }
};

inline Tensor apply_trigger(const Tensor& x, const Trigger& tr) {
  require_same_shape(x, tr.mask, "apply_trigger");
  require_finite(x, "apply_trigger");
  Tensor out = x;
  for (std::int64_t i = 0; i < out.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    out.v[k] = tr.mask.v[k] * tr.pattern.v[k] + (1.0 - tr.mask.v[k]) * x.v[k];
  }
  return out;
}

inline std::int64_t round_half_up(double x) {
  return static_cast<std::int64_t>(std::floor(x + 0.5));
}

struct SplitResult {
  std::vector<std::int64_t> poisoned;
  std::vector<std::int64_t> clean;
};

// |D_p| = round(p n) half-up; membership is a deterministic function of
// split_seed via one Fisher-Yates permutation. D_p takes the permutation
// prefix when |D_p| <= |D_c| and the complement of the |D_c|-prefix
// otherwise, so split(p) and split(1-p) swap the two partitions exactly
// (impossible only at |D_p| = |D_c|, where both calls return the same split).
inline SplitResult split_dataset(std::int64_t n, const PoisonSpec& spec) {
  if (n < 1) throw std::invalid_argument("split_dataset: dataset must be non-empty");
  spec.validate();
  const std::int64_t k = round_half_up(spec.rate * static_cast<double>(n));
  std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  RandomStream rng(spec.split_seed);
  rng.shuffle(perm);

  std::vector<bool> is_poisoned(static_cast<std::size_t>(n), false);
  if (k <= n - k) {
    for (std::int64_t i = 0; i < k; ++i) is_poisoned[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = true;
  } else {
    for (auto&& b : is_poisoned) b = true;
    for (std::int64_t i = 0; i < n - k; ++i) is_poisoned[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = false;
  }
  SplitResult out;
  out.poisoned.reserve(static_cast<std::size_t>(k));
  out.clean.reserve(static_cast<std::size_t>(n - k));
  for (std::int64_t i = 0; i < n; ++i)
    (is_poisoned[static_cast<std::size_t>(i)] ? out.poisoned : out.clean).push_back(i);
  return out;
}

// Built-in trigger/target library (desk-scale stand-ins).

inline Trigger coordinate_trigger(std::int64_t d, std::int64_t coord, double value) {
  if (coord < 0 || coord >= d) throw std::invalid_argument("coordinate_trigger: coord outside [0, d)");
  Tensor g = Tensor::vec(d), m = Tensor::vec(d);
  g.at(coord) = value;
  m.at(coord) = 1.0;
  return Trigger(g, m);
}

// Solid box of the given size with its top-left corner at (row, col).
inline Trigger box_trigger(std::int64_t h, std::int64_t w, std::int64_t size, double value,
                           std::int64_t row, std::int64_t col) {
  if (size < 1 || row < 0 || col < 0 || row + size > h || col + size > w)
    throw std::invalid_argument("box_trigger: box does not fit");
  Tensor g = Tensor::image(h, w), m = Tensor::image(h, w);
  for (std::int64_t r = row; r < row + size; ++r)
    for (std::int64_t c = col; c < col + size; ++c) {
      g.at(r, c) = value;
      m.at(r, c) = 1.0;
    }
  return Trigger(g, m);
}

inline Trigger corner_box_trigger(std::int64_t h, std::int64_t w, std::int64_t size, double value) {
  return box_trigger(h, w, size, value, h - size, w - size);
}

// Checkered stamp in the bottom-right corner; alternating +value/-value.
inline Trigger pattern_stamp_trigger(std::int64_t h, std::int64_t w, std::int64_t size,
                                     double value) {
  if (size < 1 || size > h || size > w)
    throw std::invalid_argument("pattern_stamp_trigger: stamp does not fit");
  Tensor g = Tensor::image(h, w), m = Tensor::image(h, w);
  for (std::int64_t r = h - size; r < h; ++r)
    for (std::int64_t c = w - size; c < w; ++c) {
      g.at(r, c) = ((r + c) % 2 == 0) ? value : -value;
      m.at(r, c) = 1.0;
    }
  return Trigger(g, m);
}

inline Tensor point_target(const std::vector<double>& values) {
  Tensor y = Tensor::vec(static_cast<std::int64_t>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) y.v[i] = values[i];
  return y;
}

// Centered plus-sign stamp, intensity +1 on a -1 background.
inline Tensor plus_target(std::int64_t h, std::int64_t w, std::int64_t arm = 2) {
  Tensor y = Tensor::image(h, w, -1.0);
  const std::int64_t cr = h / 2, cc = w / 2;
  for (std::int64_t r = cr - arm; r <= cr + arm; ++r)
    if (r >= 0 && r < h) y.at(r, cc) = 1.0;
  for (std::int64_t c = cc - arm; c <= cc + arm; ++c)
    if (c >= 0 && c < w) y.at(cr, c) = 1.0;
  return y;
}

}  // namespace bdlab
