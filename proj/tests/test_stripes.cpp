#include <doctest.h>

#include "support.hpp"
#include "swp/kernels.hpp"
#include "swp/stripes.hpp"

using namespace swp;

namespace {

StripeMeta meta(std::size_t n, std::size_t c, std::size_t k, std::size_t stride = 1) {
  return {n, c, k, stride, (k - 1) / 2, n, c};
}

}  // namespace

TEST_CASE("extraction examples") {
  const FsConvLayer full = FsConvLayer::create(2, 4, 3);
  const StripeLayer all = extract_stripes(full);
  CHECK(all.kept() == 18);
  CHECK(all.surviving_filters() == std::vector<std::uint32_t>{0, 1});

  FsConvLayer frozen = full;
  for (std::size_t f = 0; f < 18; ++f) frozen.skeleton.freeze(f);
  const StripeLayer none = extract_stripes(frozen);
  CHECK(none.kept() == 0);
  CHECK(none.surviving_filters().empty());

  FsConvLayer half = full;
  for (std::size_t f = 0; f < 9; ++f) half.skeleton.freeze(f);
  CHECK(extract_stripes(half).surviving_filters() == std::vector<std::uint32_t>{1});
}

TEST_CASE("extracted stripe weights carry the merged skeleton") {
  test::Rng rng(71);
  const FsConvLayer layer = test::random_layer(rng, 3, 2, 3, 1, false, 0.3);
  const StripeLayer s = extract_stripes(layer);
  CHECK(s.kept() == 27 - layer.skeleton.frozen_count());
  for (const auto& r : s.stripes()) {
    REQUIRE_FALSE(layer.skeleton.frozen(r.filter, r.i, r.j));
    for (std::size_t c = 0; c < 2; ++c)
      REQUIRE(r.weights[c] == layer.skeleton.value(r.filter, r.i, r.j) * layer.weight(r.filter, c, r.i, r.j));
  }
}

TEST_CASE("stripe layers are sorted and validated") {
  std::vector<StripeRecord> recs{{1, 0, 0, {1.0}}, {0, 2, 1, {2.0}}, {0, 0, 2, {3.0}}};
  const StripeLayer l(meta(2, 1, 3), recs);
  CHECK(l.stripes()[0].j == 2);
  CHECK(l.stripes()[1].i == 2);
  CHECK(l.stripes()[2].filter == 1);
  CHECK(l.surviving_filters() == std::vector<std::uint32_t>{0, 1});

  CHECK_THROWS_AS(StripeLayer(meta(2, 1, 3), {{0, 0, 0, {1.0}}, {0, 0, 0, {2.0}}}), ShapeError);
  CHECK_THROWS_AS(StripeLayer(meta(2, 1, 3), {{2, 0, 0, {1.0}}}), ShapeError);
  CHECK_THROWS_AS(StripeLayer(meta(2, 1, 3), {{0, 3, 0, {1.0}}}), ShapeError);
  CHECK_THROWS_AS(StripeLayer(meta(2, 1, 3), {{0, 0, 0, {1.0, 2.0}}}), ShapeError);
  CHECK_THROWS_AS(StripeLayer(meta(2, 1, 2), {}), ShapeError);
  StripeMeta bad = meta(2, 1, 3);
  bad.dense_filters = 1;
  CHECK_THROWS_AS(StripeLayer(bad, {}), ShapeError);
}

TEST_CASE("a single center stripe is a 1x1 convolution") {
  test::Rng rng(72);
  const Tensor4 x = test::random_tensor({2, 3, 5, 5}, rng);
  const std::vector<double> w{0.5, -1.0, 2.0};
  const StripeLayer l(meta(1, 3, 3), {{0, 1, 1, w}});
  const Tensor4 y = stripe_conv_forward(l, x);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t h = 0; h < 5; ++h)
      for (std::size_t v = 0; v < 5; ++v) {
        double expect = 0.0;
        for (std::size_t c = 0; c < 3; ++c) expect += w[c] * x(b, c, h, v);
        REQUIRE(y(b, 0, h, v) == doctest::Approx(expect).epsilon(1e-14));
      }
}

TEST_CASE("all stripes kept reproduces dense convolution (200 random configurations)") {
  test::Rng rng(73);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t k = test::pick(rng, 0, 1) ? 3 : 1;
    FsConvLayer layer = test::random_layer(rng, test::pick(rng, 1, 4), test::pick(rng, 1, 4), k, test::pick(rng, 1, 2));
    for (double& v : layer.skeleton.values()) v = 1.0;
    const Tensor4 x = test::random_tensor({2, layer.channels(), test::pick(rng, 3, 8), test::pick(rng, 3, 8)}, rng);
    const Tensor4 dense = kernels::serial::conv_forward(x, layer.weight, layer.params());
    REQUIRE(max_abs_diff(stripe_conv_forward(extract_stripes(layer), x), dense) < 1e-10);
  }
}

TEST_CASE("pruned layers reproduce the FS forward pass") {
  test::Rng rng(74);
  for (int rep = 0; rep < 100; ++rep) {
    const FsConvLayer layer = test::random_layer(rng, test::pick(rng, 1, 5), test::pick(rng, 1, 4),
                                                 test::pick(rng, 0, 1) ? 3 : 1, test::pick(rng, 1, 2),
                                                 test::pick(rng, 0, 1) == 1, test::uniform(rng, 0.0, 1.0));
    const Tensor4 x = test::random_tensor({2, layer.channels(), test::pick(rng, 3, 8), test::pick(rng, 3, 8)}, rng);
    const StripeLayer s = extract_stripes(layer);
    const Tensor4 y = stripe_conv_forward(s, x);
    REQUIRE(max_abs_diff(y, fs_conv_forward(layer, x)) < 1e-10);
    std::vector<bool> alive(layer.filters(), false);
    for (auto f : s.surviving_filters()) alive[f] = true;
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t n = 0; n < layer.filters(); ++n)
        if (!alive[n])
          for (std::size_t q = 0; q < y.shape().plane(); ++q) REQUIRE(y.plane(b, n)[q] == 0.0);
  }
}

TEST_CASE("float stripe path agrees with the double path") {
  test::Rng rng(75);
  const FsConvLayer layer = test::random_layer(rng, 6, 5, 3, 1, false, 0.4);
  const Tensor4 x = test::random_tensor({2, 5, 7, 7}, rng);
  const StripeLayer s = extract_stripes(layer);
  const Tensor4 yd = stripe_conv_forward(s, x);
  const Tensor4f yf = stripe_conv_forward(s, to_float(x));
  for (std::size_t q = 0; q < yd.size(); ++q) REQUIRE(std::abs(yd.data()[q] - yf.data()[q]) < 1e-5);
}

TEST_CASE("stripe convolution rejects channel mismatch") {
  const StripeLayer l(meta(1, 3, 3), {});
  CHECK_THROWS_AS(stripe_conv_forward(l, Tensor4({1, 2, 4, 4})), ShapeError);
}
