#include "swp/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include <omp.h>

#include "swp/errors.hpp"
#include "swp/kernels.hpp"

namespace swp {

namespace {

class ThreadPin {
 public:
  explicit ThreadPin(int n) : saved_(omp_get_max_threads()) { omp_set_num_threads(n); }
  ~ThreadPin() { omp_set_num_threads(saved_); }
  ThreadPin(const ThreadPin&) = delete;
  ThreadPin& operator=(const ThreadPin&) = delete;

 private:
  int saved_;
};

template <typename F>
double best_ms(std::size_t repeats, F&& f) {
  double best = INFINITY;
  for (std::size_t r = 0; r < std::max<std::size_t>(repeats, 1); ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

}  // namespace

std::vector<BenchRow> bench_kernels(const BenchSpec& spec, const std::vector<double>& grid) {
  if (spec.kernel % 2 == 0) throw UsageError("bench kernel size must be odd");
  const ThreadPin pin(1);
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);

  Tensor4f x({spec.batch, spec.channels, spec.height, spec.width});
  for (float& v : x.data()) v = dist(rng);
  const float scale = 1.0f / std::sqrt(static_cast<float>(spec.channels * spec.kernel * spec.kernel));
  Tensor4f w({spec.filters, spec.channels, spec.kernel, spec.kernel});
  for (float& v : w.data()) v = dist(rng) * scale;

  const std::size_t k2 = spec.kernel * spec.kernel;
  const kernels::ConvParams params{spec.stride, (spec.kernel - 1) / 2};
  std::vector<std::size_t> order(spec.filters * k2);
  std::iota(order.begin(), order.end(), 0);

  std::vector<BenchRow> rows;
  for (double s : grid) {
    if (!(s >= 0.0 && s <= 1.0)) throw UsageError("sparsity levels must lie in [0, 1]");
    std::shuffle(order.begin(), order.end(), rng);
    const auto removed = static_cast<std::size_t>(std::llround(s * static_cast<double>(order.size())));
    std::vector<bool> keep(order.size(), true);
    for (std::size_t k = 0; k < removed; ++k) keep[order[k]] = false;

    Tensor4f wd = w;
    kernels::PackedStripes<float> packed;
    packed.filters = spec.filters;
    packed.channels = spec.channels;
    packed.kernel = spec.kernel;
    packed.params = params;
    for (std::size_t n = 0; n < spec.filters; ++n)
      for (std::size_t i = 0; i < spec.kernel; ++i)
        for (std::size_t j = 0; j < spec.kernel; ++j) {
          if (!keep[n * k2 + i * spec.kernel + j]) {
            for (std::size_t c = 0; c < spec.channels; ++c) wd(n, c, i, j) = 0.0f;
            continue;
          }
          packed.entries.push_back({static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(i),
                                    static_cast<std::uint32_t>(j), packed.weights.size()});
          for (std::size_t c = 0; c < spec.channels; ++c) packed.weights.push_back(w(n, c, i, j));
        }
    packed.build_groups();

    Tensor4f dense_out, stripe_out;
    BenchRow row;
    row.sparsity = s;
    if (spec.serial) {
      row.dense_ms = best_ms(spec.repeats, [&] { dense_out = kernels::serial::conv_forward(x, wd, params); });
      row.stripe_ms = best_ms(spec.repeats, [&] { stripe_out = kernels::serial::stripe_forward(x, packed); });
    } else {
      row.dense_ms = best_ms(spec.repeats, [&] { dense_out = kernels::conv_forward(x, wd, params); });
      row.stripe_ms = best_ms(spec.repeats, [&] { stripe_out = kernels::stripe_forward(x, packed); });
    }
    const auto a = dense_out.data();
    const auto b = stripe_out.data();
    if (a.size() != b.size()) throw ShapeError("bench: kernel output shapes differ");
    for (std::size_t k = 0; k < a.size(); ++k)
      row.max_diff = std::max(row.max_diff, static_cast<double>(std::abs(a[k] - b[k])));
    row.checksum_ok = row.max_diff <= 1e-6;
    rows.push_back(row);
  }
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::string out = "sparsity,dense_ms,stripe_ms,checksum_ok\n";
  char line[128];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%.4f,%.4f,%.4f,%s\n", r.sparsity, r.dense_ms, r.stripe_ms,
                  r.checksum_ok ? "true" : "false");
    out += line;
  }
  return out;
}

}  // namespace swp
