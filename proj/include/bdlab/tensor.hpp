#pragma once
// DataTensor: dense doubles in one of two modes, vector [d] or image [H, W]
// (row-major). All process math is elementwise, so both modes share code.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace bdlab {

enum class TensorMode : std::uint8_t { Vector = 0, Image = 1 };

struct Tensor {
  TensorMode mode = TensorMode::Vector;
  std::vector<std::int64_t> dims;
  std::vector<double> v;

  Tensor() = default;
  Tensor(TensorMode m, std::vector<std::int64_t> d)
      : mode(m), dims(std::move(d)) {
    std::int64_t n = 1;
    for (auto x : dims) {
      if (x <= 0) throw std::invalid_argument("Tensor: dims must be positive");
      n *= x;
    }
    if (mode == TensorMode::Vector && dims.size() != 1)
      throw std::invalid_argument("Tensor: vector mode needs rank 1");
    if (mode == TensorMode::Image && dims.size() != 2)
      throw std::invalid_argument("Tensor: image mode needs rank 2");
    v.assign(static_cast<std::size_t>(n), 0.0);
  }

  static Tensor vec(std::int64_t d, double fill = 0.0) {
    Tensor t(TensorMode::Vector, {d});
    for (double& x : t.v) x = fill;
    return t;
  }
  static Tensor image(std::int64_t h, std::int64_t w, double fill = 0.0) {
    Tensor t(TensorMode::Image, {h, w});
    for (double& x : t.v) x = fill;
    return t;
  }

  std::int64_t size() const { return static_cast<std::int64_t>(v.size()); }

  double& at(std::int64_t i) { return v[static_cast<std::size_t>(i)]; }
  double at(std::int64_t i) const { return v[static_cast<std::size_t>(i)]; }
  double& at(std::int64_t r, std::int64_t c) { return v[static_cast<std::size_t>(r * dims[1] + c)]; }
  double at(std::int64_t r, std::int64_t c) const { return v[static_cast<std::size_t>(r * dims[1] + c)]; }
};

inline bool same_shape(const Tensor& a, const Tensor& b) {
  return a.mode == b.mode && a.dims == b.dims;
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!same_shape(a, b))
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

inline bool all_finite(const Tensor& t) {
  for (double x : t.v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline void require_finite(const Tensor& t, const char* op) {
  if (!all_finite(t))
    throw std::invalid_argument(std::string(op) + ": non-finite input");
}

}  // namespace bdlab
