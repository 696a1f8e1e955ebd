#include <doctest.h>

#include "support.hpp"
#include "swp/tensor.hpp"

using namespace swp;

TEST_CASE("padded_get uses 1-based coordinates with zero padding") {
  const Tensor4 x({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  CHECK(padded_get(x, 0, 0, 0, 0) == 0.0);
  CHECK(padded_get(x, 0, 0, 1, 1) == 1.0);
  CHECK(padded_get(x, 0, 0, 3, 2) == 0.0);
  CHECK(padded_get(x, 0, 0, 2, 1) == 3.0);
  CHECK(padded_get(x, 0, 0, 1, 2) == 2.0);
  CHECK(padded_get(x, 0, 0, -5, 1) == 0.0);
}

TEST_CASE("padded_get agrees with direct indexing and is zero outside, exhaustively") {
  test::Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const Shape4 s{test::pick(rng, 1, 2), test::pick(rng, 1, 3), test::pick(rng, 1, 4), test::pick(rng, 1, 4)};
    const Tensor4 x = test::random_tensor(s, rng);
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t c = 0; c < s.c; ++c)
        for (std::ptrdiff_t p = -2; p <= static_cast<std::ptrdiff_t>(s.h) + 2; ++p)
          for (std::ptrdiff_t q = -2; q <= static_cast<std::ptrdiff_t>(s.w) + 2; ++q) {
            const bool inside = p >= 1 && q >= 1 && p <= static_cast<std::ptrdiff_t>(s.h) &&
                                q <= static_cast<std::ptrdiff_t>(s.w);
            const double expect = inside ? x(n, c, static_cast<std::size_t>(p - 1), static_cast<std::size_t>(q - 1)) : 0.0;
            REQUIRE(padded_get(x, n, c, p, q) == expect);
            REQUIRE(at_or_zero(x, n, c, p - 1, q - 1) == expect);
          }
  }
}

TEST_CASE("tensor construction enforces dims and data length") {
  CHECK_THROWS_AS(Tensor4({0, 1, 1, 1}), ShapeError);
  CHECK_THROWS_AS(Tensor4({1, 1, 2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(Tensor2(2, 2, std::vector<double>{1}), ShapeError);
  const Tensor4 t({2, 3, 4, 5}, 1.5);
  CHECK(t.size() == 120);
  CHECK(t(1, 2, 3, 4) == 1.5);
  CHECK(t.plane(1, 2) - t.data().data() == (1 * 3 + 2) * 20);
}

TEST_CASE("elementwise examples") {
  test::Rng rng(3);
  const Shape4 s{2, 2, 3, 3};
  const Tensor4 zeros(s), ones(s, 1.0);
  const Tensor4 x = test::random_tensor(s, rng);
  CHECK(elementwise(zeros, zeros, ElementwiseOp::add) == zeros);
  CHECK(elementwise(x, ones, ElementwiseOp::mul) == x);
  CHECK(elementwise(x, x, ElementwiseOp::sub) == zeros);
  CHECK_THROWS_AS(elementwise(x, Tensor4({2, 2, 3, 4}), ElementwiseOp::add), ShapeError);
}

TEST_CASE("add and mul are shape preserving and bit-exactly commutative") {
  test::Rng rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    const Shape4 s{test::pick(rng, 1, 3), test::pick(rng, 1, 3), test::pick(rng, 1, 5), test::pick(rng, 1, 5)};
    const Tensor4 a = test::random_tensor(s, rng, -1e3, 1e3), b = test::random_tensor(s, rng, -1e-3, 1e-3);
    for (auto op : {ElementwiseOp::add, ElementwiseOp::mul}) {
      const Tensor4 ab = elementwise(a, b, op), ba = elementwise(b, a, op);
      REQUIRE(ab.shape() == s);
      REQUIRE(ab == ba);
    }
    REQUIRE(elementwise(a, b, ElementwiseOp::sub).shape() == s);
  }
}

TEST_CASE("max_abs_diff and float conversion") {
  const Tensor4 a({1, 1, 1, 3}, std::vector<double>{1, 2, 3});
  const Tensor4 b({1, 1, 1, 3}, std::vector<double>{1, 2.5, 2});
  CHECK(max_abs_diff(a, b) == 1.0);
  CHECK_THROWS_AS(max_abs_diff(a, Tensor4({1, 1, 1, 2})), ShapeError);
  const Tensor4f f = to_float(b);
  CHECK(f(0, 0, 0, 1) == 2.5f);
}
