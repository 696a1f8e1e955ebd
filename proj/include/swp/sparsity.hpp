#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "swp/fs_conv.hpp"

namespace swp {

enum class SparsityMode { stripe, group, lasso_weights };

const char* to_string(SparsityMode m);
SparsityMode parse_sparsity_mode(const std::string& s);

struct SparsityConfig {
  double alpha = 1e-5;  // penalty weight
  double delta = 0.05;  // freeze threshold
  SparsityMode mode = SparsityMode::stripe;

  /// Throws UsageError on negative alpha/delta.
  void validate() const;
};

/// Sum of |I| over every skeleton entry of every layer (frozen entries are 0).
double skeleton_penalty(std::span<const FsConvLayer> layers);

/// alpha * sign(I) per layer, sign(0) = 0, zero on frozen entries.
std::vector<std::vector<double>> skeleton_penalty_grad(std::span<const FsConvLayer> layers, double alpha);

/// Freezes every unfrozen entry with |I| < delta; returns how many changed.
std::size_t apply_threshold(std::span<FsConvLayer> layers, double delta);

/// Penalty over layer-shared (K, K) skeletons. Throws ModeError unless `mode`
/// is group and every layer's skeleton is shared.
double group_penalty_view(std::span<const FsConvLayer> layers, SparsityMode mode);

struct LassoPenalty {
  double value = 0.0;
  std::vector<Tensor4> grad;  // d(value)/dW per layer
};

/// Group Lasso on the weights: one group per stripe W[n, :, i, j].
/// Throws ModeError unless `mode` is lasso_weights.
LassoPenalty lasso_weight_penalty(std::span<const FsConvLayer> layers, SparsityMode mode);

/// Lasso-mode pruning rule: freezes the skeleton entry of every stripe whose
/// weight norm is below delta.
std::size_t apply_lasso_threshold(std::span<FsConvLayer> layers, double delta);

/// Number of (filter, i, j) stripes removed by frozen skeleton entries. A
/// frozen entry of a shared skeleton removes one stripe per filter.
std::size_t frozen_stripe_count(std::span<const FsConvLayer> layers);

/// Dispatches to the threshold rule of `cfg.mode`.
std::size_t prune(std::span<FsConvLayer> layers, const SparsityConfig& cfg);

}  // namespace swp
