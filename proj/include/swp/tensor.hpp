#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "swp/errors.hpp"

namespace swp {

struct Shape4 {
  std::size_t n = 1, c = 1, h = 1, w = 1;

  std::size_t size() const noexcept { return n * c * h * w; }
  std::size_t plane() const noexcept { return h * w; }
  bool operator==(const Shape4&) const = default;
};

std::string to_string(const Shape4& s);

/// Dense rank-4 array in row-major (n, c, h, w) order.
template <typename T>
class BasicTensor4 {
 public:
  using value_type = T;

  BasicTensor4() : data_(1, T{}) {}
  explicit BasicTensor4(Shape4 shape, T fill = T{}) : shape_(shape), data_(check(shape), fill) {}
  BasicTensor4(Shape4 shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != check(shape)) throw ShapeError("tensor data length does not match " + to_string(shape));
  }

  const Shape4& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }

  T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) noexcept {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }
  const T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }

  /// Contiguous (h, w) plane for sample n, channel c.
  T* plane(std::size_t n, std::size_t c) noexcept { return data_.data() + (n * shape_.c + c) * shape_.plane(); }
  const T* plane(std::size_t n, std::size_t c) const noexcept {
    return data_.data() + (n * shape_.c + c) * shape_.plane();
  }
  /// All channels of sample n.
  T* sample(std::size_t n) noexcept { return data_.data() + n * shape_.c * shape_.plane(); }
  const T* sample(std::size_t n) const noexcept { return data_.data() + n * shape_.c * shape_.plane(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const BasicTensor4&) const = default;

 private:
  static std::size_t check(const Shape4& s) {
    if (s.n == 0 || s.c == 0 || s.h == 0 || s.w == 0) throw ShapeError("tensor dims must be >= 1, got " + to_string(s));
    return s.size();
  }

  Shape4 shape_{};
  std::vector<T> data_;
};

using Tensor4 = BasicTensor4<double>;
using Tensor4f = BasicTensor4<float>;

/// Rank-2 row-major array (logits, label batches, linear weights).
class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  bool operator==(const Tensor2&) const = default;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

/// Zero-padded read with 1-based spatial coordinates: x[n, c, p-1, q-1] when
/// 1 <= p <= H and 1 <= q <= W, else 0. Sample/channel indices are 0-based
/// and must be in range.
double padded_get(const Tensor4& x, std::size_t n, std::size_t c, std::ptrdiff_t p, std::ptrdiff_t q);

/// 0-based variant used by the kernels.
template <typename T>
inline T at_or_zero(const BasicTensor4<T>& x, std::size_t n, std::size_t c, std::ptrdiff_t h, std::ptrdiff_t w) {
  if (h < 0 || w < 0 || h >= static_cast<std::ptrdiff_t>(x.shape().h) || w >= static_cast<std::ptrdiff_t>(x.shape().w))
    return T{};
  return x(n, c, static_cast<std::size_t>(h), static_cast<std::size_t>(w));
}

enum class ElementwiseOp { add, sub, mul };

Tensor4 elementwise(const Tensor4& a, const Tensor4& b, ElementwiseOp op);

double max_abs_diff(std::span<const double> a, std::span<const double> b);
double max_abs_diff(const Tensor4& a, const Tensor4& b);

Tensor4f to_float(const Tensor4& x);

}  // namespace swp
