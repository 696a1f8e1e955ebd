#pragma once

// Generators and independent oracles shared by the test binaries.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "swp/fs_conv.hpp"
#include "swp/tensor.hpp"

namespace swp::test {

using Rng = std::mt19937_64;

inline std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline double uniform(Rng& rng, double lo = -1.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Tensor4 random_tensor(Shape4 s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor4 t(s);
  for (double& v : t.data()) v = uniform(rng, lo, hi);
  return t;
}

/// Random weights; skeleton values in +-[0.2, 1.5] with a random sign, a
/// fraction `freeze` of entries frozen.
inline FsConvLayer random_layer(Rng& rng, std::size_t n, std::size_t c, std::size_t k, std::size_t stride = 1,
                                bool shared = false, double freeze = 0.0) {
  FsConvLayer layer = FsConvLayer::create(n, c, k, stride, shared);
  for (double& v : layer.weight.data()) v = uniform(rng);
  auto values = layer.skeleton.values();
  for (double& v : values) v = uniform(rng, 0.2, 1.5) * (uniform(rng) < 0 ? -1.0 : 1.0);
  for (std::size_t f = 0; f < values.size(); ++f)
    if (uniform(rng, 0.0, 1.0) < freeze) layer.skeleton.freeze(f);
  return layer;
}

/// The layer's forward rule written out term by term, reading the input
/// through the 1-based zero-padded accessor.
inline Tensor4 literal_forward(const FsConvLayer& layer, const Tensor4& x) {
  const std::size_t k = layer.kernel(), s = layer.stride, p = layer.pad;
  const std::size_t oh = (x.shape().h + 2 * p - k) / s + 1;
  const std::size_t ow = (x.shape().w + 2 * p - k) / s + 1;
  Tensor4 out({x.shape().n, layer.filters(), oh, ow});
  for (std::size_t b = 0; b < x.shape().n; ++b)
    for (std::size_t n = 0; n < layer.filters(); ++n)
      for (std::size_t h = 0; h < oh; ++h)
        for (std::size_t w = 0; w < ow; ++w) {
          double acc = 0.0;
          for (std::size_t c = 0; c < layer.channels(); ++c)
            for (std::size_t i = 0; i < k; ++i)
              for (std::size_t j = 0; j < k; ++j) {
                const auto row = static_cast<std::ptrdiff_t>(h * s + i + 1) - static_cast<std::ptrdiff_t>(p);
                const auto col = static_cast<std::ptrdiff_t>(w * s + j + 1) - static_cast<std::ptrdiff_t>(p);
                acc += layer.skeleton.scale(n, i, j) * layer.weight(n, c, i, j) * padded_get(x, b, c, row, col);
              }
          out(b, n, h, w) = acc;
        }
  return out;
}

/// Central differences of f with respect to every element of `params`.
inline std::vector<double> numeric_grad(std::span<double> params, const std::function<double()>& f,
                                        double step = 1e-5) {
  std::vector<double> g(params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double saved = params[k];
    params[k] = saved + step;
    const double up = f();
    params[k] = saved - step;
    const double down = f();
    params[k] = saved;
    g[k] = (up - down) / (2.0 * step);
  }
  return g;
}

/// ||a - b|| / max(||a||, ||b||), 0 when both vanish.
inline double rel_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    diff += (a[k] - b[k]) * (a[k] - b[k]);
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale == 0.0 ? std::sqrt(diff) : std::sqrt(diff) / scale;
}

/// Relative agreement, or absolute agreement within `abs_tol` for gradients
/// that vanish analytically (e.g. scale-invariant parameters under batch norm).
inline bool grad_close(std::span<const double> analytic, std::span<const double> numeric, double rel_tol = 1e-5,
                       double abs_tol = 1e-8) {
  if (rel_error(analytic, numeric) < rel_tol) return true;
  double worst = 0.0;
  for (std::size_t k = 0; k < analytic.size(); ++k) worst = std::max(worst, std::abs(analytic[k] - numeric[k]));
  return worst < abs_tol;
}

inline double sum_squares(const Tensor4& t) {
  double s = 0.0;
  for (double v : t.data()) s += v * v;
  return s;
}

}  // namespace swp::test
