#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "swp/fs_conv.hpp"
#include "swp/kernels.hpp"

namespace swp {

/// One kept 1x1xC sub-filter at kernel position (i, j) of a filter.
struct StripeRecord {
  std::uint32_t filter = 0;
  std::uint32_t i = 0, j = 0;
  std::vector<double> weights;  // length = layer input channels

  bool operator==(const StripeRecord&) const = default;
};

struct StripeMeta {
  std::size_t filters = 0;        // output channels of this layer
  std::size_t channels = 0;       // input channels
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;
  std::size_t dense_filters = 0;  // filter count before compaction
  std::size_t dense_channels = 0; // input channels before the producer was compacted

  bool operator==(const StripeMeta&) const = default;
};

/// A pruned convolution layer stored as a sorted, duplicate-free stripe list.
class StripeLayer {
 public:
  StripeLayer() = default;
  /// Sorts by (filter, i, j) and validates bounds, duplicates and weight lengths (ShapeError).
  StripeLayer(StripeMeta meta, std::vector<StripeRecord> stripes);

  const StripeMeta& meta() const noexcept { return meta_; }
  const std::vector<StripeRecord>& stripes() const noexcept { return stripes_; }
  std::size_t kept() const noexcept { return stripes_.size(); }
  /// Sorted indexes of filters owning at least one stripe.
  const std::vector<std::uint32_t>& surviving_filters() const noexcept { return surviving_; }

  template <typename T>
  kernels::PackedStripes<T> pack() const;

  bool operator==(const StripeLayer&) const = default;

 private:
  StripeMeta meta_;
  std::vector<StripeRecord> stripes_;
  std::vector<std::uint32_t> surviving_;
};

/// Emits I[n,i,j] * W[n,:,i,j] for every unfrozen skeleton entry.
StripeLayer extract_stripes(const FsConvLayer& layer);

/// Sum of shifted 1x1 convolutions, one per stripe. Filters without stripes
/// produce zero planes.
Tensor4 stripe_conv_forward(const StripeLayer& layer, const Tensor4& x);
Tensor4f stripe_conv_forward(const StripeLayer& layer, const Tensor4f& x);

}  // namespace swp
