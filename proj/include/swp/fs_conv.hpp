#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "swp/kernels.hpp"
#include "swp/tensor.hpp"

namespace swp {

/// Learnable per-stripe scale of one conv layer, shape (rows, K, K).
///
/// In stripe mode there is one row per filter. In shared mode a single row
/// is broadcast over every filter of the layer, which turns stripe pruning
/// into group-wise pruning (a kernel position is kept or removed for all
/// filters at once). Frozen entries are exactly zero and never change again.
class FilterSkeleton {
 public:
  FilterSkeleton() = default;
  FilterSkeleton(std::size_t filters, std::size_t kernel, bool shared);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t kernel() const noexcept { return kernel_; }
  bool shared() const noexcept { return shared_; }
  std::size_t row_of(std::size_t filter) const noexcept { return shared_ ? 0 : filter; }
  std::size_t index(std::size_t row, std::size_t i, std::size_t j) const noexcept {
    return (row * kernel_ + i) * kernel_ + j;
  }

  double value(std::size_t row, std::size_t i, std::size_t j) const noexcept { return values_[index(row, i, j)]; }
  bool frozen(std::size_t row, std::size_t i, std::size_t j) const noexcept { return frozen_[index(row, i, j)] != 0; }
  /// Value applied to stripe (filter, i, j).
  double scale(std::size_t filter, std::size_t i, std::size_t j) const noexcept {
    return values_[index(row_of(filter), i, j)];
  }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<const std::uint8_t> frozen_mask() const noexcept { return frozen_; }

  /// Zeroes and freezes one entry; returns false if it was already frozen.
  bool freeze(std::size_t flat_index);
  std::size_t frozen_count() const;

  /// Restores raw state (checkpoint loading). Frozen entries must hold 0.
  void assign(std::vector<double> values, std::vector<std::uint8_t> frozen);

  bool operator==(const FilterSkeleton&) const = default;

 private:
  std::size_t rows_ = 0, kernel_ = 0;
  bool shared_ = false;
  std::vector<double> values_;
  std::vector<std::uint8_t> frozen_;
};

/// Bias-free convolution whose effective weight is W ⊙ I, with I broadcast
/// over the input-channel axis.
struct FsConvLayer {
  Tensor4 weight;  // (N, C, K, K)
  FilterSkeleton skeleton;
  std::size_t stride = 1;
  std::size_t pad = 0;

  /// Zero weights, all-ones skeleton, pad = (K - 1) / 2.
  static FsConvLayer create(std::size_t filters, std::size_t channels, std::size_t kernel, std::size_t stride = 1,
                            bool shared_skeleton = false);

  std::size_t filters() const noexcept { return weight.shape().n; }
  std::size_t channels() const noexcept { return weight.shape().c; }
  std::size_t kernel() const noexcept { return weight.shape().h; }
  kernels::ConvParams params() const noexcept { return {stride, pad}; }

  /// Throws ShapeError if weight and skeleton disagree.
  void validate() const;
  Tensor4 effective_weight() const;
};

struct LayerGrads {
  Tensor4 dW;
  std::vector<double> dI;  // shaped like the skeleton
  Tensor4 dX;              // left default-constructed when not requested
};

Tensor4 fs_conv_forward(const FsConvLayer& layer, const Tensor4& x);

LayerGrads fs_conv_backward(const FsConvLayer& layer, const Tensor4& x, const Tensor4& dout, bool need_dx = true);

/// Folds the skeleton into the weights and resets it to all-ones.
FsConvLayer merge_skeleton(const FsConvLayer& layer);

}  // namespace swp
