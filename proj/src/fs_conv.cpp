#include "swp/fs_conv.hpp"

#include <algorithm>

namespace swp {

FilterSkeleton::FilterSkeleton(std::size_t filters, std::size_t kernel, bool shared)
    : rows_(shared ? 1 : filters), kernel_(kernel), shared_(shared),
      values_(rows_ * kernel * kernel, 1.0), frozen_(rows_ * kernel * kernel, 0) {
  if (filters == 0 || kernel == 0) throw ShapeError("skeleton dims must be >= 1");
}

bool FilterSkeleton::freeze(std::size_t flat_index) {
  SWP_EXPECTS(flat_index < values_.size());
  if (frozen_[flat_index]) return false;
  frozen_[flat_index] = 1;
  values_[flat_index] = 0.0;
  return true;
}

std::size_t FilterSkeleton::frozen_count() const {
  return static_cast<std::size_t>(std::count(frozen_.begin(), frozen_.end(), std::uint8_t{1}));
}

void FilterSkeleton::assign(std::vector<double> values, std::vector<std::uint8_t> frozen) {
  if (values.size() != values_.size() || frozen.size() != frozen_.size())
    throw ShapeError("skeleton assign: size mismatch");
  for (std::size_t k = 0; k < values.size(); ++k)
    if (frozen[k] && values[k] != 0.0) throw ShapeError("skeleton assign: frozen entry is not zero");
  values_ = std::move(values);
  frozen_ = std::move(frozen);
}

FsConvLayer FsConvLayer::create(std::size_t filters, std::size_t channels, std::size_t kernel, std::size_t stride,
                                bool shared_skeleton) {
  if (kernel % 2 == 0) throw ShapeError("only odd kernel sizes are supported");
  FsConvLayer layer;
  layer.weight = Tensor4({filters, channels, kernel, kernel});
  layer.skeleton = FilterSkeleton(filters, kernel, shared_skeleton);
  layer.stride = stride;
  layer.pad = (kernel - 1) / 2;
  return layer;
}

void FsConvLayer::validate() const {
  const auto& s = weight.shape();
  if (s.h != s.w || s.h % 2 == 0) throw ShapeError("conv weight must have square odd kernel");
  if (skeleton.kernel() != s.h) throw ShapeError("skeleton kernel size does not match weights");
  if (!skeleton.shared() && skeleton.rows() != s.n) throw ShapeError("skeleton rows do not match filter count");
  if (stride == 0) throw ShapeError("stride must be >= 1");
}

Tensor4 FsConvLayer::effective_weight() const {
  Tensor4 w = weight;
  const auto& s = w.shape();
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t i = 0; i < s.h; ++i)
        for (std::size_t j = 0; j < s.w; ++j) w(n, c, i, j) *= skeleton.scale(n, i, j);
  return w;
}

Tensor4 fs_conv_forward(const FsConvLayer& layer, const Tensor4& x) {
  layer.validate();
  return kernels::conv_forward(x, layer.effective_weight(), layer.params());
}

LayerGrads fs_conv_backward(const FsConvLayer& layer, const Tensor4& x, const Tensor4& dout, bool need_dx) {
  layer.validate();
  LayerGrads g;
  // Gradient w.r.t. the effective weight V = W ⊙ I; both factors follow from it.
  const Tensor4 dv = kernels::conv_backward_weight(x, dout, layer.weight.shape(), layer.params());
  const auto& s = layer.weight.shape();
  const auto& sk = layer.skeleton;
  g.dW = Tensor4(s);
  g.dI.assign(sk.values().size(), 0.0);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t i = 0; i < s.h; ++i)
      for (std::size_t j = 0; j < s.w; ++j) {
        const std::size_t idx = sk.index(sk.row_of(n), i, j);
        const double scale = sk.values()[idx];
        double acc = 0.0;
        for (std::size_t c = 0; c < s.c; ++c) {
          g.dW(n, c, i, j) = scale * dv(n, c, i, j);
          acc += layer.weight(n, c, i, j) * dv(n, c, i, j);
        }
        g.dI[idx] += acc;
      }
  for (std::size_t k = 0; k < g.dI.size(); ++k)
    if (sk.frozen_mask()[k]) g.dI[k] = 0.0;
  if (need_dx) g.dX = kernels::conv_backward_input(layer.effective_weight(), dout, x.shape(), layer.params());
  return g;
}

FsConvLayer merge_skeleton(const FsConvLayer& layer) {
  layer.validate();
  FsConvLayer merged = layer;
  merged.weight = layer.effective_weight();
  merged.skeleton = FilterSkeleton(layer.filters(), layer.kernel(), layer.skeleton.shared());
  return merged;
}

}  // namespace swp
