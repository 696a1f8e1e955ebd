#include "swp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>

namespace swp {

void contract_violation(const char* expr, const char* file, int line) {
  std::fprintf(stderr, "contract violation: %s (%s:%d)\n", expr, file, line);
  std::abort();
}

std::string to_string(const Shape4& s) {
  return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," + std::to_string(s.h) + "," +
         std::to_string(s.w) + ")";
}

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) throw ShapeError("Tensor2 data length does not match dims");
}

double padded_get(const Tensor4& x, std::size_t n, std::size_t c, std::ptrdiff_t p, std::ptrdiff_t q) {
  SWP_EXPECTS(n < x.shape().n);
  SWP_EXPECTS(c < x.shape().c);
  return at_or_zero(x, n, c, p - 1, q - 1);
}

Tensor4 elementwise(const Tensor4& a, const Tensor4& b, ElementwiseOp op) {
  if (a.shape() != b.shape())
    throw ShapeError("elementwise: shape " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  Tensor4 out(a.shape());
  auto x = a.data();
  auto y = b.data();
  auto z = out.data();
  switch (op) {
    case ElementwiseOp::add:
      std::transform(x.begin(), x.end(), y.begin(), z.begin(), [](double u, double v) { return u + v; });
      break;
    case ElementwiseOp::sub:
      std::transform(x.begin(), x.end(), y.begin(), z.begin(), [](double u, double v) { return u - v; });
      break;
    case ElementwiseOp::mul:
      std::transform(x.begin(), x.end(), y.begin(), z.begin(), [](double u, double v) { return u * v; });
      break;
  }
  return out;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("max_abs_diff: length mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double max_abs_diff(const Tensor4& a, const Tensor4& b) {
  if (a.shape() != b.shape()) throw ShapeError("max_abs_diff: shape mismatch");
  return max_abs_diff(a.data(), b.data());
}

Tensor4f to_float(const Tensor4& x) {
  std::vector<float> v(x.size());
  std::transform(x.data().begin(), x.data().end(), v.begin(), [](double d) { return static_cast<float>(d); });
  return Tensor4f(x.shape(), std::move(v));
}

}  // namespace swp
