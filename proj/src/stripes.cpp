#include "swp/stripes.hpp"

#include <algorithm>
#include <tuple>

namespace swp {

StripeLayer::StripeLayer(StripeMeta meta, std::vector<StripeRecord> stripes)
    : meta_(meta), stripes_(std::move(stripes)) {
  if (meta_.filters == 0 || meta_.channels == 0) throw ShapeError("stripe layer needs >= 1 filter and channel");
  if (meta_.kernel % 2 == 0) throw ShapeError("stripe layer kernel must be odd");
  if (meta_.stride == 0) throw ShapeError("stripe layer stride must be >= 1");
  if (meta_.dense_filters < meta_.filters) throw ShapeError("dense filter count below current filter count");
  if (meta_.dense_channels < meta_.channels) throw ShapeError("dense channel count below current channel count");
  auto key = [](const StripeRecord& s) { return std::tie(s.filter, s.i, s.j); };
  std::sort(stripes_.begin(), stripes_.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
  for (std::size_t k = 0; k < stripes_.size(); ++k) {
    const auto& s = stripes_[k];
    if (s.filter >= meta_.filters || s.i >= meta_.kernel || s.j >= meta_.kernel)
      throw ShapeError("stripe index out of layer bounds");
    if (s.weights.size() != meta_.channels) throw ShapeError("stripe weight length does not match input channels");
    if (k > 0 && key(stripes_[k - 1]) == key(s)) throw ShapeError("duplicate stripe (filter, i, j)");
    if (surviving_.empty() || surviving_.back() != s.filter) surviving_.push_back(s.filter);
  }
}

template <typename T>
kernels::PackedStripes<T> StripeLayer::pack() const {
  kernels::PackedStripes<T> p;
  p.filters = meta_.filters;
  p.channels = meta_.channels;
  p.kernel = meta_.kernel;
  p.params = {meta_.stride, meta_.pad};
  p.entries.reserve(stripes_.size());
  p.weights.reserve(stripes_.size() * meta_.channels);
  for (const auto& s : stripes_) {
    p.entries.push_back({s.filter, s.i, s.j, p.weights.size()});
    for (double w : s.weights) p.weights.push_back(static_cast<T>(w));
  }
  p.build_groups();
  return p;
}

template kernels::PackedStripes<float> StripeLayer::pack<float>() const;
template kernels::PackedStripes<double> StripeLayer::pack<double>() const;

StripeLayer extract_stripes(const FsConvLayer& layer) {
  layer.validate();
  const auto& sk = layer.skeleton;
  std::vector<StripeRecord> stripes;
  for (std::size_t n = 0; n < layer.filters(); ++n)
    for (std::size_t i = 0; i < layer.kernel(); ++i)
      for (std::size_t j = 0; j < layer.kernel(); ++j) {
        if (sk.frozen(sk.row_of(n), i, j)) continue;
        StripeRecord r{static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j),
                       std::vector<double>(layer.channels())};
        const double scale = sk.scale(n, i, j);
        for (std::size_t c = 0; c < layer.channels(); ++c) r.weights[c] = scale * layer.weight(n, c, i, j);
        stripes.push_back(std::move(r));
      }
  const StripeMeta meta{layer.filters(), layer.channels(), layer.kernel(), layer.stride, layer.pad, layer.filters(),
                        layer.channels()};
  return StripeLayer(meta, std::move(stripes));
}

Tensor4 stripe_conv_forward(const StripeLayer& layer, const Tensor4& x) {
  return kernels::stripe_forward(x, layer.pack<double>());
}

Tensor4f stripe_conv_forward(const StripeLayer& layer, const Tensor4f& x) {
  return kernels::stripe_forward(x, layer.pack<float>());
}

}  // namespace swp
