#define EIGEN_DONT_PARALLELIZE
#include <Eigen/Core>

#include <algorithm>
#include <cstring>
#include <map>

#include "swp/kernels.hpp"

namespace swp::kernels {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

struct Window {
  std::size_t lo, hi;  // valid output range [lo, hi)
};

// Output positions o with 0 <= o*stride + offset - pad < in.
Window valid_range(std::size_t in, std::size_t out, std::size_t offset, std::size_t stride, std::size_t pad) {
  const auto shift = static_cast<std::ptrdiff_t>(offset) - static_cast<std::ptrdiff_t>(pad);
  const auto s = static_cast<std::ptrdiff_t>(stride);
  std::ptrdiff_t lo = shift >= 0 ? 0 : (-shift + s - 1) / s;
  std::ptrdiff_t last = static_cast<std::ptrdiff_t>(in) - 1 - shift;
  std::ptrdiff_t hi = last < 0 ? 0 : last / s + 1;
  hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(out));
  lo = std::min(lo, hi);
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

struct Geometry {
  std::size_t c, h, w, ho, wo, stride, pad;
};

// dst (C x Ho*Wo) <- input sample shifted by kernel offset (i, j), zero padded.
template <typename T>
void gather(const T* src, const Geometry& g, std::size_t i, std::size_t j, T* dst) {
  const Window rows = valid_range(g.h, g.ho, i, g.stride, g.pad);
  const Window cols = valid_range(g.w, g.wo, j, g.stride, g.pad);
  const std::size_t out_plane = g.ho * g.wo;
  for (std::size_t c = 0; c < g.c; ++c) {
    const T* in = src + c * g.h * g.w;
    T* out = dst + c * out_plane;
    std::fill(out, out + out_plane, T{});
    for (std::size_t ho = rows.lo; ho < rows.hi; ++ho) {
      const T* in_row = in + (ho * g.stride + i - g.pad) * g.w;
      T* out_row = out + ho * g.wo;
      if (g.stride == 1) {
        const std::size_t first = cols.lo + j - g.pad;
        std::memcpy(out_row + cols.lo, in_row + first, (cols.hi - cols.lo) * sizeof(T));
      } else {
        for (std::size_t wo = cols.lo; wo < cols.hi; ++wo) out_row[wo] = in_row[wo * g.stride + j - g.pad];
      }
    }
  }
}

// Adjoint of gather: accumulate src (C x Ho*Wo) back into the input layout.
template <typename T>
void scatter_add(const T* src, const Geometry& g, std::size_t i, std::size_t j, T* dst) {
  const Window rows = valid_range(g.h, g.ho, i, g.stride, g.pad);
  const Window cols = valid_range(g.w, g.wo, j, g.stride, g.pad);
  for (std::size_t c = 0; c < g.c; ++c) {
    const T* in = src + c * g.ho * g.wo;
    T* out = dst + c * g.h * g.w;
    for (std::size_t ho = rows.lo; ho < rows.hi; ++ho) {
      T* out_row = out + (ho * g.stride + i - g.pad) * g.w;
      const T* in_row = in + ho * g.wo;
      for (std::size_t wo = cols.lo; wo < cols.hi; ++wo) out_row[wo * g.stride + j - g.pad] += in_row[wo];
    }
  }
}

// (N, C, K, K) -> K*K blocks of (N x C).
template <typename T>
std::vector<T> pack_by_offset(const BasicTensor4<T>& w) {
  const auto& s = w.shape();
  const std::size_t kk = s.h * s.w;
  std::vector<T> out(kk * s.n * s.c);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t o = 0; o < kk; ++o) out[(o * s.n + n) * s.c + c] = w(n, c, o / s.w, o % s.w);
  return out;
}

Geometry geometry(const Shape4& x, const Shape4& out, ConvParams p) {
  return {x.c, x.h, x.w, out.h, out.w, p.stride, p.pad};
}

void check_conv(const Shape4& x, const Shape4& w) {
  if (x.c != w.c) throw ShapeError("conv: input has " + std::to_string(x.c) + " channels, weights expect " + std::to_string(w.c));
  if (w.h != w.w || w.h % 2 == 0) throw ShapeError("conv: kernel must be square with odd size");
}

}  // namespace

std::size_t conv_out_dim(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
  if (stride == 0) throw ShapeError("conv: stride must be >= 1");
  if (in + 2 * pad < k) throw ShapeError("conv: kernel larger than padded input");
  return (in + 2 * pad - k) / stride + 1;
}

Shape4 conv_out_shape(const Shape4& x, std::size_t filters, std::size_t k, ConvParams p) {
  return {x.n, filters, conv_out_dim(x.h, k, p.stride, p.pad), conv_out_dim(x.w, k, p.stride, p.pad)};
}

template <typename T>
void PackedStripes<T>::build_groups() {
  std::map<std::pair<std::uint32_t, std::uint32_t>, OffsetGroup> by_offset;
  for (const auto& e : entries) {
    auto& g = by_offset[{e.i, e.j}];
    g.i = e.i;
    g.j = e.j;
    g.filters.push_back(e.filter);
    g.weights.insert(g.weights.end(), weights.begin() + static_cast<std::ptrdiff_t>(e.weight_offset),
                     weights.begin() + static_cast<std::ptrdiff_t>(e.weight_offset + channels));
  }
  groups.clear();
  for (auto& [key, g] : by_offset) groups.push_back(std::move(g));
}

template <typename T>
BasicTensor4<T> conv_forward(const BasicTensor4<T>& x, const BasicTensor4<T>& w, ConvParams p) {
  check_conv(x.shape(), w.shape());
  const std::size_t k = w.shape().h;
  const std::size_t filters = w.shape().n;
  BasicTensor4<T> out(conv_out_shape(x.shape(), filters, k, p));
  const Geometry g = geometry(x.shape(), out.shape(), p);
  const std::size_t hw = g.ho * g.wo;
  const std::vector<T> packed = pack_by_offset(w);
  const auto batch = static_cast<std::ptrdiff_t>(x.shape().n);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < batch; ++b) {
    std::vector<T> shifted(g.c * hw);
    MapMat<T> y(out.sample(static_cast<std::size_t>(b)), static_cast<Eigen::Index>(filters), static_cast<Eigen::Index>(hw));
    for (std::size_t o = 0; o < k * k; ++o) {
      gather(x.sample(static_cast<std::size_t>(b)), g, o / k, o % k, shifted.data());
      CMapMat<T> wo(packed.data() + o * filters * g.c, static_cast<Eigen::Index>(filters), static_cast<Eigen::Index>(g.c));
      CMapMat<T> s(shifted.data(), static_cast<Eigen::Index>(g.c), static_cast<Eigen::Index>(hw));
      y.noalias() += wo * s;
    }
  }
  return out;
}

Tensor4 conv_backward_weight(const Tensor4& x, const Tensor4& dout, const Shape4& w_shape, ConvParams p) {
  check_conv(x.shape(), w_shape);
  const std::size_t k = w_shape.h;
  const std::size_t filters = w_shape.n;
  const Shape4 expect = conv_out_shape(x.shape(), filters, k, p);
  if (dout.shape() != expect) throw ShapeError("conv backward: dout shape " + to_string(dout.shape()) + ", expected " + to_string(expect));
  const Geometry g = geometry(x.shape(), expect, p);
  const std::size_t hw = g.ho * g.wo;
  const std::size_t block = filters * g.c;
  const std::size_t batch = x.shape().n;
  // Per-sample partials summed in sample order keep the result independent of thread count.
  std::vector<double> partial(batch * k * k * block, 0.0);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t bi = 0; bi < static_cast<std::ptrdiff_t>(batch); ++bi) {
    const auto b = static_cast<std::size_t>(bi);
    std::vector<double> shifted(g.c * hw);
    CMapMat<double> dy(dout.sample(b), static_cast<Eigen::Index>(filters), static_cast<Eigen::Index>(hw));
    for (std::size_t o = 0; o < k * k; ++o) {
      gather(x.sample(b), g, o / k, o % k, shifted.data());
      CMapMat<double> s(shifted.data(), static_cast<Eigen::Index>(g.c), static_cast<Eigen::Index>(hw));
      MapMat<double> dw(partial.data() + (b * k * k + o) * block, static_cast<Eigen::Index>(filters),
                        static_cast<Eigen::Index>(g.c));
      dw.noalias() = dy * s.transpose();
    }
  }

  Tensor4 dw(w_shape);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t o = 0; o < k * k; ++o)
      for (std::size_t n = 0; n < filters; ++n)
        for (std::size_t c = 0; c < g.c; ++c) dw(n, c, o / k, o % k) += partial[(b * k * k + o) * block + n * g.c + c];
  return dw;
}

Tensor4 conv_backward_input(const Tensor4& w, const Tensor4& dout, const Shape4& x_shape, ConvParams p) {
  check_conv(x_shape, w.shape());
  const std::size_t k = w.shape().h;
  const std::size_t filters = w.shape().n;
  const Shape4 expect = conv_out_shape(x_shape, filters, k, p);
  if (dout.shape() != expect) throw ShapeError("conv backward: dout shape " + to_string(dout.shape()) + ", expected " + to_string(expect));
  const Geometry g = geometry(x_shape, expect, p);
  const std::size_t hw = g.ho * g.wo;
  const std::vector<double> packed = pack_by_offset(w);
  Tensor4 dx(x_shape);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t bi = 0; bi < static_cast<std::ptrdiff_t>(x_shape.n); ++bi) {
    const auto b = static_cast<std::size_t>(bi);
    std::vector<double> tmp(g.c * hw);
    CMapMat<double> dy(dout.sample(b), static_cast<Eigen::Index>(filters), static_cast<Eigen::Index>(hw));
    for (std::size_t o = 0; o < k * k; ++o) {
      CMapMat<double> wo(packed.data() + o * filters * g.c, static_cast<Eigen::Index>(filters), static_cast<Eigen::Index>(g.c));
      MapMat<double> t(tmp.data(), static_cast<Eigen::Index>(g.c), static_cast<Eigen::Index>(hw));
      t.noalias() = wo.transpose() * dy;
      scatter_add(tmp.data(), g, o / k, o % k, dx.sample(b));
    }
  }
  return dx;
}

template <typename T>
BasicTensor4<T> stripe_forward(const BasicTensor4<T>& x, const PackedStripes<T>& s) {
  if (x.shape().c != s.channels)
    throw ShapeError("stripe conv: input has " + std::to_string(x.shape().c) + " channels, layer expects " + std::to_string(s.channels));
  BasicTensor4<T> out(conv_out_shape(x.shape(), s.filters, s.kernel, s.params));
  const Geometry g = geometry(x.shape(), out.shape(), s.params);
  const std::size_t hw = g.ho * g.wo;
  const auto batch = static_cast<std::ptrdiff_t>(x.shape().n);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t bi = 0; bi < batch; ++bi) {
    const auto b = static_cast<std::size_t>(bi);
    std::vector<T> shifted(g.c * hw);
    std::vector<T> partial;
    for (const auto& grp : s.groups) {
      const auto rows = static_cast<Eigen::Index>(grp.filters.size());
      partial.resize(grp.filters.size() * hw);
      gather(x.sample(b), g, grp.i, grp.j, shifted.data());
      CMapMat<T> wg(grp.weights.data(), rows, static_cast<Eigen::Index>(g.c));
      CMapMat<T> sm(shifted.data(), static_cast<Eigen::Index>(g.c), static_cast<Eigen::Index>(hw));
      MapMat<T> r(partial.data(), rows, static_cast<Eigen::Index>(hw));
      r.noalias() = wg * sm;
      for (std::size_t row = 0; row < grp.filters.size(); ++row) {
        T* dst = out.plane(b, grp.filters[row]);
        const T* src = partial.data() + row * hw;
        for (std::size_t q = 0; q < hw; ++q) dst[q] += src[q];
      }
    }
  }
  return out;
}

template struct PackedStripes<float>;
template struct PackedStripes<double>;
template BasicTensor4<float> conv_forward(const BasicTensor4<float>&, const BasicTensor4<float>&, ConvParams);
template BasicTensor4<double> conv_forward(const BasicTensor4<double>&, const BasicTensor4<double>&, ConvParams);
template BasicTensor4<float> stripe_forward(const BasicTensor4<float>&, const PackedStripes<float>&);
template BasicTensor4<double> stripe_forward(const BasicTensor4<double>&, const PackedStripes<double>&);

}  // namespace swp::kernels
