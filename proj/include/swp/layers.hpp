#pragma once

// Auxiliary layers used to assemble desk-scale networks around FS convs.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "swp/tensor.hpp"

namespace swp {

Tensor4 relu_forward(const Tensor4& x);
Tensor4 relu_backward(const Tensor4& x, const Tensor4& dy);

/// 2x2 max pooling with stride 2 (floor on odd sizes).
struct MaxPoolResult {
  Tensor4 out;
  std::vector<std::size_t> argmax;  // flat input index per output element
};
MaxPoolResult maxpool2_forward(const Tensor4& x);
Tensor4 maxpool2_backward(const Shape4& x_shape, const std::vector<std::size_t>& argmax, const Tensor4& dy);

/// (N, C, H, W) -> (N, C, 1, 1)
Tensor4 global_avgpool_forward(const Tensor4& x);
Tensor4 global_avgpool_backward(const Shape4& x_shape, const Tensor4& dy);

struct BatchNorm {
  std::vector<double> gamma, beta, running_mean, running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  static BatchNorm create(std::size_t channels);
  std::size_t channels() const noexcept { return gamma.size(); }
  /// Per-channel (scale, shift) equivalent to eval-mode normalization.
  void folded(std::vector<double>& scale, std::vector<double>& shift) const;
};

struct BatchNormCache {
  Tensor4 xhat;
  std::vector<double> inv_std;
};

struct BatchNormGrads {
  Tensor4 dX;
  std::vector<double> dgamma, dbeta;
};

/// Normalizes with batch statistics and updates the running estimates.
Tensor4 batchnorm_forward_train(BatchNorm& bn, const Tensor4& x, BatchNormCache& cache);
Tensor4 batchnorm_forward_eval(const BatchNorm& bn, const Tensor4& x);
BatchNormGrads batchnorm_backward(const BatchNorm& bn, const BatchNormCache& cache, const Tensor4& dy);

/// y = W x + b with W stored (out x in); input is flattened per sample.
struct Linear {
  std::size_t in = 0, out = 0;
  std::vector<double> weight, bias;

  static Linear create(std::size_t in, std::size_t out);
};

struct LinearGrads {
  Tensor4 dX;
  std::vector<double> dW, db;
};

Tensor4 linear_forward(const Linear& lin, const Tensor4& x);
LinearGrads linear_backward(const Linear& lin, const Tensor4& x, const Tensor4& dy);

struct XentResult {
  double loss = 0.0;  // mean over the batch
  Tensor2 dlogits;    // gradient of the mean loss
  std::size_t correct = 0;
};

XentResult softmax_xent(const Tensor2& logits, std::span<const std::uint8_t> labels);

std::size_t argmax_row(std::span<const double> row);

}  // namespace swp
