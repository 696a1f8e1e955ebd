#include "swp/kernels.hpp"

namespace swp::kernels::serial {

namespace {

std::ptrdiff_t anchor(std::size_t out, std::size_t offset, ConvParams p) {
  return static_cast<std::ptrdiff_t>(out * p.stride + offset) - static_cast<std::ptrdiff_t>(p.pad);
}

}  // namespace

template <typename T>
BasicTensor4<T> conv_forward(const BasicTensor4<T>& x, const BasicTensor4<T>& w, ConvParams p) {
  const auto& ws = w.shape();
  if (x.shape().c != ws.c) throw ShapeError("conv: channel mismatch");
  BasicTensor4<T> out(conv_out_shape(x.shape(), ws.n, ws.h, p));
  const auto& os = out.shape();
  for (std::size_t b = 0; b < os.n; ++b)
    for (std::size_t n = 0; n < os.c; ++n)
      for (std::size_t h = 0; h < os.h; ++h)
        for (std::size_t v = 0; v < os.w; ++v) {
          double acc = 0.0;
          for (std::size_t c = 0; c < ws.c; ++c)
            for (std::size_t i = 0; i < ws.h; ++i)
              for (std::size_t j = 0; j < ws.w; ++j)
                acc += static_cast<double>(w(n, c, i, j)) * at_or_zero(x, b, c, anchor(h, i, p), anchor(v, j, p));
          out(b, n, h, v) = static_cast<T>(acc);
        }
  return out;
}

Tensor4 conv_backward_weight(const Tensor4& x, const Tensor4& dout, const Shape4& w_shape, ConvParams p) {
  if (dout.shape() != conv_out_shape(x.shape(), w_shape.n, w_shape.h, p)) throw ShapeError("conv backward: dout shape");
  Tensor4 dw(w_shape);
  const auto& os = dout.shape();
  for (std::size_t n = 0; n < w_shape.n; ++n)
    for (std::size_t c = 0; c < w_shape.c; ++c)
      for (std::size_t i = 0; i < w_shape.h; ++i)
        for (std::size_t j = 0; j < w_shape.w; ++j) {
          double acc = 0.0;
          for (std::size_t b = 0; b < os.n; ++b)
            for (std::size_t h = 0; h < os.h; ++h)
              for (std::size_t v = 0; v < os.w; ++v) acc += dout(b, n, h, v) * at_or_zero(x, b, c, anchor(h, i, p), anchor(v, j, p));
          dw(n, c, i, j) = acc;
        }
  return dw;
}

Tensor4 conv_backward_input(const Tensor4& w, const Tensor4& dout, const Shape4& x_shape, ConvParams p) {
  const auto& ws = w.shape();
  if (dout.shape() != conv_out_shape(x_shape, ws.n, ws.h, p)) throw ShapeError("conv backward: dout shape");
  Tensor4 dx(x_shape);
  const auto& os = dout.shape();
  const auto in_h = static_cast<std::ptrdiff_t>(x_shape.h);
  const auto in_w = static_cast<std::ptrdiff_t>(x_shape.w);
  for (std::size_t b = 0; b < os.n; ++b)
    for (std::size_t n = 0; n < os.c; ++n)
      for (std::size_t h = 0; h < os.h; ++h)
        for (std::size_t v = 0; v < os.w; ++v)
          for (std::size_t c = 0; c < ws.c; ++c)
            for (std::size_t i = 0; i < ws.h; ++i)
              for (std::size_t j = 0; j < ws.w; ++j) {
                const auto r = anchor(h, i, p);
                const auto q = anchor(v, j, p);
                if (r < 0 || q < 0 || r >= in_h || q >= in_w) continue;
                dx(b, c, static_cast<std::size_t>(r), static_cast<std::size_t>(q)) += w(n, c, i, j) * dout(b, n, h, v);
              }
  return dx;
}

// Stripes outer, spatial inner: each stripe is a shifted 1x1 convolution
// accumulated into its filter's output plane.
template <typename T>
BasicTensor4<T> stripe_forward(const BasicTensor4<T>& x, const PackedStripes<T>& s) {
  if (x.shape().c != s.channels) throw ShapeError("stripe conv: channel mismatch");
  BasicTensor4<T> out(conv_out_shape(x.shape(), s.filters, s.kernel, s.params));
  const auto& os = out.shape();
  for (std::size_t b = 0; b < os.n; ++b)
    for (const auto& e : s.entries) {
      const T* wv = s.weights.data() + e.weight_offset;
      for (std::size_t h = 0; h < os.h; ++h)
        for (std::size_t v = 0; v < os.w; ++v) {
          T acc{};
          for (std::size_t c = 0; c < s.channels; ++c) acc += wv[c] * at_or_zero(x, b, c, anchor(h, e.i, s.params), anchor(v, e.j, s.params));
          out(b, e.filter, h, v) += acc;
        }
    }
  return out;
}

template BasicTensor4<float> conv_forward(const BasicTensor4<float>&, const BasicTensor4<float>&, ConvParams);
template BasicTensor4<double> conv_forward(const BasicTensor4<double>&, const BasicTensor4<double>&, ConvParams);
template BasicTensor4<float> stripe_forward(const BasicTensor4<float>&, const PackedStripes<float>&);
template BasicTensor4<double> stripe_forward(const BasicTensor4<double>&, const PackedStripes<double>&);

}  // namespace swp::kernels::serial
