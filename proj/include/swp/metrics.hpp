#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "swp/stripe_model.hpp"

namespace swp {

/// Cost of one pruned conv layer. FLOPs count one multiply-accumulate as 2.
struct LayerCost {
  std::string name;
  std::size_t filters = 0, dense_filters = 0, channels = 0, dense_channels = 0, kernel = 1, stride = 1;
  std::size_t out_h = 0, out_w = 0;
  std::size_t kept_stripes = 0;
  std::size_t weight_params = 0;        // kept_stripes * C
  std::size_t dense_weight_params = 0;  // dense_filters * dense_channels * K * K
  std::size_t index_entries = 0;        // one (n, i, j) record per kept stripe
  std::size_t index_bitmap_bits = 0;    // dense alternative: N * K * K bits
  std::size_t index_bytes = 0;          // 16-bit packed (n, i, j) per kept stripe
  std::size_t flops = 0;
  std::size_t dense_flops = 0;
  double pruning_ratio = 0.0;           // 1 - weight_params / dense_weight_params
};

struct CostReport {
  std::vector<LayerCost> layers;
  std::size_t aux_params = 0;  // folded batch-norm affines, linear layers
  std::size_t aux_flops = 0;

  std::size_t weight_params() const;
  std::size_t dense_weight_params() const;
  std::size_t index_entries() const;
  std::size_t index_bitmap_bits() const;
  std::size_t index_bytes() const;
  std::size_t conv_flops() const;
  std::size_t dense_conv_flops() const;
  /// weight_params + index_entries + aux_params
  std::size_t total_params() const;
  std::size_t total_flops() const;
  double pruning_ratio() const;

  std::string table() const;
  /// One `layer.metric value` line per entry.
  std::string key_values() const;
};

LayerCost layer_cost(const StripeLayer& layer, std::string name, std::size_t out_h = 0, std::size_t out_w = 0);

/// Parameter accounting only (FLOP fields left zero).
CostReport count_params(std::span<const StripeLayer> layers, std::span<const std::string> names = {});
/// Parameters of a model (FLOPs at the model's own input size are included).
CostReport count_params(const StripeModel& model);
/// Full report for a given input spatial size.
CostReport count_flops(const StripeModel& model, std::size_t height, std::size_t width);

struct ShapeBin {
  std::uint32_t mask = 0;  // bit i*K + j set when stripe (i, j) is kept
  std::size_t frequency = 0;
  bool operator==(const ShapeBin&) const = default;
};

/// Filter shapes by descending frequency, ties by ascending mask. Filters
/// removed by compaction count as the empty shape.
std::vector<ShapeBin> shape_histogram(const StripeLayer& layer);
std::vector<std::vector<ShapeBin>> shape_histogram(const StripeModel& model);

/// Fraction of (dense) filters keeping each of the K*K positions.
std::vector<double> stripe_ratio_per_position(const StripeLayer& layer);
std::vector<std::vector<double>> stripe_ratio_per_position(const StripeModel& model);

std::vector<const StripeLayer*> conv_layers(const StripeModel& model);

/// One pruned layer described only by its dimensions and kept-stripe count.
struct PrunedLayerSpec {
  std::string name;
  std::size_t channels, dense_filters, surviving_filters, kernel, stride, kept_stripes, out_hw;
};

/// Pruned ResNet18 (ImageNet) conv layers: Strip(C, kept) with the following
/// BatchNorm width as surviving filters.
std::vector<PrunedLayerSpec> resnet18_pruned_layers();

/// Builds stripe layers with the given counts (zero weights), spreading
/// stripes so that exactly `surviving_filters` filters own one or more.
StripeLayer synthetic_stripe_layer(const PrunedLayerSpec& spec);

CostReport replay_layers(std::span<const PrunedLayerSpec> specs);

}  // namespace swp
