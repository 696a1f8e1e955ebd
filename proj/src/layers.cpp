#include "swp/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace swp {

Tensor4 relu_forward(const Tensor4& x) {
  Tensor4 y = x;
  for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor4 relu_backward(const Tensor4& x, const Tensor4& dy) {
  if (x.shape() != dy.shape()) throw ShapeError("relu backward: shape mismatch");
  Tensor4 dx(x.shape());
  for (std::size_t k = 0; k < x.size(); ++k) dx.data()[k] = x.data()[k] > 0.0 ? dy.data()[k] : 0.0;
  return dx;
}

MaxPoolResult maxpool2_forward(const Tensor4& x) {
  const auto& s = x.shape();
  if (s.h < 2 || s.w < 2) throw ShapeError("maxpool2: input smaller than 2x2");
  MaxPoolResult r{Tensor4({s.n, s.c, s.h / 2, s.w / 2}), {}};
  const auto& os = r.out.shape();
  r.argmax.resize(os.size());
  std::size_t k = 0;
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      const std::size_t base = (n * s.c + c) * s.plane();
      for (std::size_t h = 0; h < os.h; ++h)
        for (std::size_t w = 0; w < os.w; ++w, ++k) {
          std::size_t best = base + 2 * h * s.w + 2 * w;
          for (std::size_t dh = 0; dh < 2; ++dh)
            for (std::size_t dw = 0; dw < 2; ++dw) {
              const std::size_t idx = base + (2 * h + dh) * s.w + 2 * w + dw;
              if (x.data()[idx] > x.data()[best]) best = idx;
            }
          r.argmax[k] = best;
          r.out.data()[k] = x.data()[best];
        }
    }
  return r;
}

Tensor4 maxpool2_backward(const Shape4& x_shape, const std::vector<std::size_t>& argmax, const Tensor4& dy) {
  if (argmax.size() != dy.size()) throw ShapeError("maxpool2 backward: shape mismatch");
  Tensor4 dx(x_shape);
  for (std::size_t k = 0; k < argmax.size(); ++k) dx.data()[argmax[k]] += dy.data()[k];
  return dx;
}

Tensor4 global_avgpool_forward(const Tensor4& x) {
  const auto& s = x.shape();
  Tensor4 y({s.n, s.c, 1, 1});
  const double inv = 1.0 / static_cast<double>(s.plane());
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      const double* p = x.plane(n, c);
      double acc = 0.0;
      for (std::size_t q = 0; q < s.plane(); ++q) acc += p[q];
      y(n, c, 0, 0) = acc * inv;
    }
  return y;
}

Tensor4 global_avgpool_backward(const Shape4& x_shape, const Tensor4& dy) {
  if (dy.shape() != Shape4{x_shape.n, x_shape.c, 1, 1}) throw ShapeError("avgpool backward: shape mismatch");
  Tensor4 dx(x_shape);
  const double inv = 1.0 / static_cast<double>(x_shape.plane());
  for (std::size_t n = 0; n < x_shape.n; ++n)
    for (std::size_t c = 0; c < x_shape.c; ++c) {
      double* p = dx.plane(n, c);
      std::fill(p, p + x_shape.plane(), dy(n, c, 0, 0) * inv);
    }
  return dx;
}

BatchNorm BatchNorm::create(std::size_t channels) {
  BatchNorm bn;
  bn.gamma.assign(channels, 1.0);
  bn.beta.assign(channels, 0.0);
  bn.running_mean.assign(channels, 0.0);
  bn.running_var.assign(channels, 1.0);
  return bn;
}

void BatchNorm::folded(std::vector<double>& scale, std::vector<double>& shift) const {
  scale.resize(channels());
  shift.resize(channels());
  for (std::size_t c = 0; c < channels(); ++c) {
    scale[c] = gamma[c] / std::sqrt(running_var[c] + eps);
    shift[c] = beta[c] - running_mean[c] * scale[c];
  }
}

Tensor4 batchnorm_forward_train(BatchNorm& bn, const Tensor4& x, BatchNormCache& cache) {
  const auto& s = x.shape();
  if (s.c != bn.channels()) throw ShapeError("batchnorm: channel mismatch");
  const double count = static_cast<double>(s.n * s.plane());
  cache.xhat = Tensor4(s);
  cache.inv_std.assign(s.c, 0.0);
  Tensor4 y(s);
  for (std::size_t c = 0; c < s.c; ++c) {
    double mean = 0.0;
    for (std::size_t n = 0; n < s.n; ++n) {
      const double* p = x.plane(n, c);
      for (std::size_t q = 0; q < s.plane(); ++q) mean += p[q];
    }
    mean /= count;
    double var = 0.0;
    for (std::size_t n = 0; n < s.n; ++n) {
      const double* p = x.plane(n, c);
      for (std::size_t q = 0; q < s.plane(); ++q) var += (p[q] - mean) * (p[q] - mean);
    }
    var /= count;
    const double inv = 1.0 / std::sqrt(var + bn.eps);
    cache.inv_std[c] = inv;
    for (std::size_t n = 0; n < s.n; ++n) {
      const double* p = x.plane(n, c);
      double* xh = cache.xhat.plane(n, c);
      double* out = y.plane(n, c);
      for (std::size_t q = 0; q < s.plane(); ++q) {
        xh[q] = (p[q] - mean) * inv;
        out[q] = bn.gamma[c] * xh[q] + bn.beta[c];
      }
    }
    const double unbiased = count > 1.0 ? var * count / (count - 1.0) : var;
    bn.running_mean[c] = (1.0 - bn.momentum) * bn.running_mean[c] + bn.momentum * mean;
    bn.running_var[c] = (1.0 - bn.momentum) * bn.running_var[c] + bn.momentum * unbiased;
  }
  return y;
}

Tensor4 batchnorm_forward_eval(const BatchNorm& bn, const Tensor4& x) {
  const auto& s = x.shape();
  if (s.c != bn.channels()) throw ShapeError("batchnorm: channel mismatch");
  Tensor4 y(s);
  for (std::size_t c = 0; c < s.c; ++c) {
    const double inv = 1.0 / std::sqrt(bn.running_var[c] + bn.eps);
    for (std::size_t n = 0; n < s.n; ++n) {
      const double* p = x.plane(n, c);
      double* out = y.plane(n, c);
      for (std::size_t q = 0; q < s.plane(); ++q) out[q] = bn.gamma[c] * (p[q] - bn.running_mean[c]) * inv + bn.beta[c];
    }
  }
  return y;
}

BatchNormGrads batchnorm_backward(const BatchNorm& bn, const BatchNormCache& cache, const Tensor4& dy) {
  const auto& s = dy.shape();
  if (s != cache.xhat.shape()) throw ShapeError("batchnorm backward: shape mismatch");
  const double count = static_cast<double>(s.n * s.plane());
  BatchNormGrads g{Tensor4(s), std::vector<double>(s.c, 0.0), std::vector<double>(s.c, 0.0)};
  for (std::size_t c = 0; c < s.c; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t n = 0; n < s.n; ++n) {
      const double* d = dy.plane(n, c);
      const double* xh = cache.xhat.plane(n, c);
      for (std::size_t q = 0; q < s.plane(); ++q) {
        sum_dy += d[q];
        sum_dy_xhat += d[q] * xh[q];
      }
    }
    g.dbeta[c] = sum_dy;
    g.dgamma[c] = sum_dy_xhat;
    const double k = bn.gamma[c] * cache.inv_std[c] / count;
    for (std::size_t n = 0; n < s.n; ++n) {
      const double* d = dy.plane(n, c);
      const double* xh = cache.xhat.plane(n, c);
      double* dx = g.dX.plane(n, c);
      for (std::size_t q = 0; q < s.plane(); ++q) dx[q] = k * (count * d[q] - sum_dy - xh[q] * sum_dy_xhat);
    }
  }
  return g;
}

Linear Linear::create(std::size_t in, std::size_t out) {
  Linear lin;
  lin.in = in;
  lin.out = out;
  lin.weight.assign(in * out, 0.0);
  lin.bias.assign(out, 0.0);
  return lin;
}

Tensor4 linear_forward(const Linear& lin, const Tensor4& x) {
  const auto& s = x.shape();
  if (s.c * s.plane() != lin.in) throw ShapeError("linear: input features " + std::to_string(s.c * s.plane()) + ", expected " + std::to_string(lin.in));
  Tensor4 y({s.n, lin.out, 1, 1});
  for (std::size_t n = 0; n < s.n; ++n) {
    const double* xv = x.sample(n);
    for (std::size_t o = 0; o < lin.out; ++o) {
      const double* wr = lin.weight.data() + o * lin.in;
      double acc = lin.bias[o];
      for (std::size_t k = 0; k < lin.in; ++k) acc += wr[k] * xv[k];
      y(n, o, 0, 0) = acc;
    }
  }
  return y;
}

LinearGrads linear_backward(const Linear& lin, const Tensor4& x, const Tensor4& dy) {
  const auto& s = x.shape();
  if (dy.shape() != Shape4{s.n, lin.out, 1, 1}) throw ShapeError("linear backward: shape mismatch");
  LinearGrads g{Tensor4(s), std::vector<double>(lin.weight.size(), 0.0), std::vector<double>(lin.out, 0.0)};
  for (std::size_t n = 0; n < s.n; ++n) {
    const double* xv = x.sample(n);
    double* dx = g.dX.sample(n);
    for (std::size_t o = 0; o < lin.out; ++o) {
      const double d = dy(n, o, 0, 0);
      g.db[o] += d;
      const double* wr = lin.weight.data() + o * lin.in;
      double* dwr = g.dW.data() + o * lin.in;
      for (std::size_t k = 0; k < lin.in; ++k) {
        dwr[k] += d * xv[k];
        dx[k] += d * wr[k];
      }
    }
  }
  return g;
}

std::size_t argmax_row(std::span<const double> row) {
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

XentResult softmax_xent(const Tensor2& logits, std::span<const std::uint8_t> labels) {
  if (labels.size() != logits.rows()) throw ShapeError("softmax_xent: label count does not match batch");
  XentResult r;
  r.dlogits = Tensor2(logits.rows(), logits.cols());
  const double inv_batch = 1.0 / static_cast<double>(logits.rows());
  for (std::size_t n = 0; n < logits.rows(); ++n) {
    const auto row = logits.row(n);
    const std::size_t y = labels[n];
    if (y >= logits.cols()) throw ShapeError("softmax_xent: label out of range");
    const double m = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - m);
    const double log_z = m + std::log(z);
    r.loss += (log_z - row[y]) * inv_batch;
    auto d = r.dlogits.row(n);
    for (std::size_t k = 0; k < row.size(); ++k) d[k] = std::exp(row[k] - log_z) * inv_batch;
    d[y] -= inv_batch;
    if (argmax_row(row) == y) ++r.correct;
  }
  return r;
}

}  // namespace swp
