#pragma once
// Procedural desk-scale datasets: a Gaussian ring mixture in vector mode and
// small random shapes (rectangles/discs on a dark background) in image mode,
// both deterministic from a seed and scaled to [-1, 1].

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "rng.hpp"
#include "tensor.hpp"

namespace bdlab {

struct DatasetSpec {
  TensorMode mode = TensorMode::Vector;
  std::int64_t count = 2048;
  // vector ring
  int modes = 8;
  double radius = 0.75;
  double sigma = 0.05;
  // image shapes
  std::int64_t height = 12;
  std::int64_t width = 12;
  std::string kind = "shapes";

  void validate() const {
    if (count < 1) throw std::invalid_argument("DatasetSpec: count must be >= 1");
    if (mode == TensorMode::Vector) {
      if (modes < 1) throw std::invalid_argument("DatasetSpec: ring needs >= 1 mode");
      if (!(radius > 0.0)) throw std::invalid_argument("DatasetSpec: radius must be positive");
      if (sigma < 0.0) throw std::invalid_argument("DatasetSpec: sigma must be >= 0");
    } else {
      if (height < 4 || width < 4 || height > 16 || width > 16)
        throw std::invalid_argument("DatasetSpec: image sizes supported in [4, 16]");
      if (kind != "shapes") throw std::invalid_argument("DatasetSpec: unknown image kind " + kind);
    }
  }

  std::vector<std::int64_t> dims() const {
    return mode == TensorMode::Vector ? std::vector<std::int64_t>{2}
                                      : std::vector<std::int64_t>{height, width};
  }
};

inline std::vector<Tensor> generate_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  spec.validate();
  RandomStream rng(seed);
  std::vector<Tensor> out;
  out.reserve(static_cast<std::size_t>(spec.count));
  if (spec.mode == TensorMode::Vector) {
    for (std::int64_t i = 0; i < spec.count; ++i) {
      const auto k = rng.randint(static_cast<std::uint64_t>(spec.modes));
      const double ang = 2.0 * std::numbers::pi * static_cast<double>(k) / spec.modes;
      Tensor x = Tensor::vec(2);
      x.at(0) = spec.radius * std::cos(ang) + spec.sigma * rng.normal();
      x.at(1) = spec.radius * std::sin(ang) + spec.sigma * rng.normal();
      out.push_back(std::move(x));
    }
    return out;
  }
  const std::int64_t H = spec.height, W = spec.width;
  for (std::int64_t i = 0; i < spec.count; ++i) {
    Tensor img = Tensor::image(H, W, -1.0);
    const double intensity = rng.uniform(0.2, 1.0);
    if (rng.randint(2) == 0) {
      const std::int64_t r0 = static_cast<std::int64_t>(rng.randint(static_cast<std::uint64_t>(H - 3)));
      const std::int64_t c0 = static_cast<std::int64_t>(rng.randint(static_cast<std::uint64_t>(W - 3)));
      const std::int64_t rh = 3 + static_cast<std::int64_t>(rng.randint(static_cast<std::uint64_t>(std::min<std::int64_t>(H - r0, 7) - 2)));
      const std::int64_t cw = 3 + static_cast<std::int64_t>(rng.randint(static_cast<std::uint64_t>(std::min<std::int64_t>(W - c0, 7) - 2)));
      for (std::int64_t r = r0; r < r0 + rh; ++r)
        for (std::int64_t c = c0; c < c0 + cw; ++c) img.at(r, c) = intensity;
    } else {
      const double cr = rng.uniform(2.0, static_cast<double>(H) - 2.0);
      const double cc = rng.uniform(2.0, static_cast<double>(W) - 2.0);
      const double rad = rng.uniform(1.5, static_cast<double>(std::min(H, W)) / 3.0);
      for (std::int64_t r = 0; r < H; ++r)
        for (std::int64_t c = 0; c < W; ++c) {
          const double dr = static_cast<double>(r) - cr, dc = static_cast<double>(c) - cc;
          if (dr * dr + dc * dc <= rad * rad) img.at(r, c) = intensity;
        }
    }
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace bdlab
