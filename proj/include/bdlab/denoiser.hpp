#pragma once
// The noise predictor eps_theta(x_t, t): a fully connected tanh network on
// concat(flattened x_t, sinusoidal time embedding), with exact reverse-mode
// gradients. Image mode flattens patches into the same MLP.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rng.hpp"
#include "tensor.hpp"

namespace bdlab {

struct DenoiserArch {
  TensorMode mode = TensorMode::Vector;
  std::vector<std::int64_t> data_dims;  // {d} or {H, W}
  std::vector<std::int64_t> hidden = {128, 128};
  std::int64_t time_embed_dim = 16;

  std::int64_t data_dim() const {
    std::int64_t n = 1;
    for (auto d : data_dims) n *= d;
    return n;
  }

  void validate() const {
    if (mode == TensorMode::Vector && data_dims.size() != 1)
      throw std::invalid_argument("DenoiserArch: vector mode needs rank-1 data_dims");
    if (mode == TensorMode::Image && data_dims.size() != 2)
      throw std::invalid_argument("DenoiserArch: image mode needs rank-2 data_dims");
    for (auto d : data_dims)
      if (d <= 0) throw std::invalid_argument("DenoiserArch: data_dims must be positive");
    if (hidden.empty()) throw std::invalid_argument("DenoiserArch: need at least one hidden layer");
    for (auto h : hidden)
      if (h <= 0) throw std::invalid_argument("DenoiserArch: hidden widths must be positive");
    if (time_embed_dim <= 0 || time_embed_dim % 2 != 0)
      throw std::invalid_argument("DenoiserArch: time_embed_dim must be positive and even");
  }

  // Linear layers as (fan_in, fan_out), input through output.
  std::vector<std::pair<std::int64_t, std::int64_t>> layer_shapes() const {
    std::vector<std::pair<std::int64_t, std::int64_t>> out;
    std::int64_t prev = data_dim() + time_embed_dim;
    for (auto h : hidden) {
      out.emplace_back(prev, h);
      prev = h;
    }
    out.emplace_back(prev, data_dim());
    return out;
  }

  std::int64_t param_count() const {
    std::int64_t n = 0;
    for (auto [in, out] : layer_shapes()) n += in * out + out;
    return n;
  }

  bool operator==(const DenoiserArch& o) const {
    return mode == o.mode && data_dims == o.data_dims && hidden == o.hidden &&
           time_embed_dim == o.time_embed_dim;
  }
};

// Flat parameter layout, per layer: W row-major [out][in], then bias [out].
struct DenoiserParams {
  DenoiserArch arch;
  std::vector<double> w;

  void validate() const {
    arch.validate();
    if (static_cast<std::int64_t>(w.size()) != arch.param_count())
      throw std::invalid_argument("DenoiserParams: parameter count does not match descriptor");
    for (double x : w)
      if (!std::isfinite(x)) throw std::invalid_argument("DenoiserParams: non-finite parameter");
  }
};

// Glorot-style scaled uniform: U(-sqrt(6/(fan_in+fan_out)), +...), biases 0.
inline DenoiserParams init_params(const DenoiserArch& arch, std::uint64_t seed) {
  arch.validate();
  DenoiserParams p;
  p.arch = arch;
  p.w.assign(static_cast<std::size_t>(arch.param_count()), 0.0);
  RandomStream rng(seed);
  std::size_t off = 0;
  for (auto [in, out] : arch.layer_shapes()) {
    const double lim = std::sqrt(6.0 / static_cast<double>(in + out));
    for (std::int64_t i = 0; i < in * out; ++i) p.w[off + static_cast<std::size_t>(i)] = rng.uniform(-lim, lim);
    off += static_cast<std::size_t>(in * out + out);
  }
  return p;
}

// Sinusoidal features of t, dimension k (even); values in [-1, 1],
// deterministic in (t, k).
inline std::vector<double> time_embedding(int t, std::int64_t k) {
  if (k <= 0 || k % 2 != 0)
    throw std::invalid_argument("time_embedding: k must be positive and even");
  std::vector<double> e(static_cast<std::size_t>(k));
  for (std::int64_t j = 0; j < k / 2; ++j) {
    const double freq = std::pow(10000.0, -2.0 * static_cast<double>(j) / static_cast<double>(k));
    e[static_cast<std::size_t>(2 * j)] = std::sin(t * freq);
    e[static_cast<std::size_t>(2 * j + 1)] = std::cos(t * freq);
  }
  return e;
}

namespace detail {

// Forward pass on a prebuilt input vector; acts[l] holds layer l's output
// (post-activation), acts[0] the input.
inline void mlp_forward(const DenoiserArch& arch, const std::vector<double>& w,
                        std::vector<std::vector<double>>& acts) {
  const auto shapes = arch.layer_shapes();
  acts.resize(shapes.size() + 1);
  std::size_t off = 0;
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    const auto [in, out] = shapes[l];
    const std::vector<double>& x = acts[l];
    std::vector<double>& y = acts[l + 1];
    y.assign(static_cast<std::size_t>(out), 0.0);
    const double* W = w.data() + off;
    const double* b = W + in * out;
    for (std::int64_t o = 0; o < out; ++o) {
      double s = b[o];
      const double* row = W + o * in;
      for (std::int64_t i = 0; i < in; ++i) s += row[i] * x[static_cast<std::size_t>(i)];
      y[static_cast<std::size_t>(o)] = (l + 1 < shapes.size()) ? std::tanh(s) : s;
    }
    off += static_cast<std::size_t>(in * out + out);
  }
}

// Reverse pass; dy enters as dL/d(output) and is consumed. Gradients are
// accumulated into grad (same layout as w) in a fixed serial order.
inline void mlp_backward(const DenoiserArch& arch, const std::vector<double>& w,
                         const std::vector<std::vector<double>>& acts, std::vector<double>& dy,
                         std::vector<double>& grad) {
  const auto shapes = arch.layer_shapes();
  std::vector<std::size_t> offs(shapes.size());
  std::size_t off = 0;
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    offs[l] = off;
    off += static_cast<std::size_t>(shapes[l].first * shapes[l].second + shapes[l].second);
  }
  std::vector<double> dx;
  for (std::size_t li = shapes.size(); li-- > 0;) {
    const auto [in, out] = shapes[li];
    const std::vector<double>& x = acts[li];
    const std::vector<double>& y = acts[li + 1];
    if (li + 1 < shapes.size())  // tanh'(z) = 1 - y^2
      for (std::int64_t o = 0; o < out; ++o)
        dy[static_cast<std::size_t>(o)] *= 1.0 - y[static_cast<std::size_t>(o)] * y[static_cast<std::size_t>(o)];
    const double* W = w.data() + offs[li];
    double* gW = grad.data() + offs[li];
    double* gb = gW + in * out;
    dx.assign(static_cast<std::size_t>(in), 0.0);
    for (std::int64_t o = 0; o < out; ++o) {
      const double d = dy[static_cast<std::size_t>(o)];
      const double* row = W + o * in;
      double* grow = gW + o * in;
      for (std::int64_t i = 0; i < in; ++i) {
        grow[i] += d * x[static_cast<std::size_t>(i)];
        dx[static_cast<std::size_t>(i)] += row[i] * d;
      }
      gb[o] += d;
    }
    dy = dx;
  }
}

inline void build_input(const DenoiserArch& arch, const Tensor& x_t, int t,
                        std::vector<double>& input) {
  if (x_t.mode != arch.mode ||
      x_t.size() != arch.data_dim())
    throw std::invalid_argument("denoiser: input shape does not match architecture");
  const auto emb = time_embedding(t, arch.time_embed_dim);
  input.resize(static_cast<std::size_t>(arch.data_dim() + arch.time_embed_dim));
  for (std::int64_t i = 0; i < x_t.size(); ++i) input[static_cast<std::size_t>(i)] = x_t.v[static_cast<std::size_t>(i)];
  for (std::int64_t i = 0; i < arch.time_embed_dim; ++i)
    input[static_cast<std::size_t>(arch.data_dim() + i)] = emb[static_cast<std::size_t>(i)];
}

}  // namespace detail

inline Tensor predict_noise(const DenoiserParams& params, const Tensor& x_t, int t) {
  if (static_cast<std::int64_t>(params.w.size()) != params.arch.param_count())
    throw std::invalid_argument("predict_noise: parameter count does not match descriptor");
  std::vector<std::vector<double>> acts(1);
  detail::build_input(params.arch, x_t, t, acts[0]);
  detail::mlp_forward(params.arch, params.w, acts);
  Tensor out = x_t;
  const auto& y = acts.back();
  for (std::int64_t i = 0; i < out.size(); ++i) out.v[static_cast<std::size_t>(i)] = y[static_cast<std::size_t>(i)];
  return out;
}

// Mean over batch and elements of squared residual, with exact gradients
// accumulated serially into grad (resized and zeroed here).
inline double loss_gradient(const DenoiserParams& params, const std::vector<Tensor>& batch_inputs,
                            const std::vector<Tensor>& batch_targets,
                            const std::vector<int>& batch_timesteps, std::vector<double>& grad) {
  params.validate();
  const std::size_t B = batch_inputs.size();
  if (B == 0) throw std::invalid_argument("loss_gradient: empty batch");
  if (batch_targets.size() != B || batch_timesteps.size() != B)
    throw std::invalid_argument("loss_gradient: batch arrays disagree");
  grad.assign(params.w.size(), 0.0);
  const double D = static_cast<double>(params.arch.data_dim());
  double loss = 0.0;
  std::vector<std::vector<double>> acts;
  std::vector<double> dy;
  for (std::size_t b = 0; b < B; ++b) {
    require_same_shape(batch_inputs[b], batch_targets[b], "loss_gradient");
    acts.assign(1, {});
    detail::build_input(params.arch, batch_inputs[b], batch_timesteps[b], acts[0]);
    detail::mlp_forward(params.arch, params.w, acts);
    const auto& pred = acts.back();
    dy.assign(pred.size(), 0.0);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double res = pred[i] - batch_targets[b].v[i];
      loss += res * res;
      dy[i] = 2.0 * res / (static_cast<double>(B) * D);
    }
    detail::mlp_backward(params.arch, params.w, acts, dy, grad);
  }
  return loss / (static_cast<double>(B) * D);
}

inline double loss_value(const DenoiserParams& params, const std::vector<Tensor>& batch_inputs,
                         const std::vector<Tensor>& batch_targets,
                         const std::vector<int>& batch_timesteps) {
  params.validate();
  const std::size_t B = batch_inputs.size();
  if (B == 0) throw std::invalid_argument("loss_value: empty batch");
  double loss = 0.0;
  std::vector<std::vector<double>> acts;
  for (std::size_t b = 0; b < B; ++b) {
    acts.assign(1, {});
    detail::build_input(params.arch, batch_inputs[b], batch_timesteps[b], acts[0]);
    detail::mlp_forward(params.arch, params.w, acts);
    const auto& pred = acts.back();
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double res = pred[i] - batch_targets[b].v[i];
      loss += res * res;
    }
  }
  return loss / (static_cast<double>(B) * params.arch.data_dim());
}

}  // namespace bdlab
