#pragma once

// Convolution kernels. The top-level functions are the production path:
// parallel over batch samples (OpenMP), with each kernel offset (i, j)
// evaluated as a shifted 1x1 convolution, i.e. one small GEMM. The
// `serial` namespace holds straightforward loop nests with identical
// signatures; tests and the benchmark compare the two.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "swp/tensor.hpp"

namespace swp::kernels {

struct ConvParams {
  std::size_t stride = 1;
  std::size_t pad = 0;
};

std::size_t conv_out_dim(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad);
Shape4 conv_out_shape(const Shape4& x, std::size_t filters, std::size_t k, ConvParams p);

/// Stripes of one layer packed for execution. `entries` is the flat list in
/// (filter, i, j) order; `groups` buckets the same stripes by kernel offset
/// so each offset can run as one GEMM.
template <typename T>
struct PackedStripes {
  struct Entry {
    std::uint32_t filter;
    std::uint32_t i, j;
    std::size_t weight_offset;  // into `weights`, length `channels`
  };
  struct OffsetGroup {
    std::uint32_t i, j;
    std::vector<std::uint32_t> filters;
    std::vector<T> weights;  // filters.size() x channels, row-major
  };

  std::size_t filters = 0, channels = 0, kernel = 1;
  ConvParams params;
  std::vector<Entry> entries;
  std::vector<T> weights;
  std::vector<OffsetGroup> groups;

  /// Rebuilds `groups` from `entries`/`weights`.
  void build_groups();
};

template <typename T>
BasicTensor4<T> conv_forward(const BasicTensor4<T>& x, const BasicTensor4<T>& w, ConvParams p);

/// dL/dw summed over the batch; `w_shape` is (N, C, K, K).
Tensor4 conv_backward_weight(const Tensor4& x, const Tensor4& dout, const Shape4& w_shape, ConvParams p);

/// dL/dx for the given weights.
Tensor4 conv_backward_input(const Tensor4& w, const Tensor4& dout, const Shape4& x_shape, ConvParams p);

template <typename T>
BasicTensor4<T> stripe_forward(const BasicTensor4<T>& x, const PackedStripes<T>& s);

namespace serial {

template <typename T>
BasicTensor4<T> conv_forward(const BasicTensor4<T>& x, const BasicTensor4<T>& w, ConvParams p);
Tensor4 conv_backward_weight(const Tensor4& x, const Tensor4& dout, const Shape4& w_shape, ConvParams p);
Tensor4 conv_backward_input(const Tensor4& w, const Tensor4& dout, const Shape4& x_shape, ConvParams p);
template <typename T>
BasicTensor4<T> stripe_forward(const BasicTensor4<T>& x, const PackedStripes<T>& s);

}  // namespace serial

}  // namespace swp::kernels
