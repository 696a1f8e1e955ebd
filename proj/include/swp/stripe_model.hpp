#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "swp/layers.hpp"
#include "swp/network.hpp"
#include "swp/stripes.hpp"

namespace swp {

/// Tags double as the on-disk layer kind byte.
enum class OpKind : std::uint8_t { stripe_conv = 1, relu = 2, maxpool2 = 3, global_avgpool = 4, linear = 5, add = 6 };

inline constexpr int kModelInput = -1;

/// One inference op. Stripe convs carry a per-output-channel affine
/// (folded batch norm) applied after the stripe sum.
struct ModelNode {
  OpKind kind = OpKind::relu;
  int input = kModelInput;
  int input2 = kModelInput;
  StripeLayer conv;
  std::vector<double> scale, shift;
  Linear linear;

  bool operator==(const ModelNode& o) const {
    return kind == o.kind && input == o.input && input2 == o.input2 && conv == o.conv && scale == o.scale &&
           shift == o.shift && linear.in == o.linear.in && linear.out == o.linear.out &&
           linear.weight == o.linear.weight && linear.bias == o.linear.bias;
  }
};

struct IoMeta {
  std::size_t channels = 1, height = 1, width = 1;
  std::size_t classes = 1;
  bool operator==(const IoMeta&) const = default;
};

/// A pruned network ready for inference. Node k reads earlier registers and
/// writes register k; the last node produces the logits.
struct StripeModel {
  IoMeta io;
  std::vector<ModelNode> nodes;

  /// Propagates shapes through the graph; throws ShapeError on any inconsistency.
  void validate() const;
  /// (channels, height, width) of every register for the given input size.
  std::vector<Shape4> register_shapes(std::size_t batch, std::size_t height, std::size_t width) const;

  bool operator==(const StripeModel&) const = default;
};

Tensor2 run_model(const StripeModel& model, const Tensor4& batch);

struct ExportOptions {
  /// Remove filters whose output is provably all-zero and shrink consumers.
  bool compact = true;
  /// Check logits of the export against the FS network on a probe batch.
  bool verify = true;
  double verify_tolerance = 1e-8;
};

/// Extracts stripes, folds each conv's batch norm into its affine, and
/// optionally compacts dead filters.
StripeModel export_model(const FsNetwork& net, const ExportOptions& opts = {});

/// Binary format (all integers little-endian, weights f32); see README.
std::vector<std::uint8_t> serialize_model(const StripeModel& model);
StripeModel deserialize_model(std::span<const std::uint8_t> bytes);

void save_model(const StripeModel& model, const std::filesystem::path& path);
StripeModel load_model(const std::filesystem::path& path);

}  // namespace swp
