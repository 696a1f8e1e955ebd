// Serial reference vs OpenMP production kernels, then dense vs stripe-wise.

#include <chrono>
#include <cstdio>
#include <random>

#include <omp.h>

#include "swp/bench.hpp"
#include "swp/kernels.hpp"

namespace {

using namespace swp;

template <typename F>
double best_ms(int repeats, F&& f) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void fill(std::span<double> v, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (double& x : v) x = d(rng);
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t batch = argc > 1 ? std::stoul(argv[1]) : 16;
  const std::size_t ch = argc > 2 ? std::stoul(argv[2]) : 32;
  const std::size_t hw = argc > 3 ? std::stoul(argv[3]) : 28;
  std::mt19937_64 rng(7);
  const kernels::ConvParams p{1, 1};
  Tensor4 x({batch, ch, hw, hw}), w({ch, ch, 3, 3});
  fill(x.data(), rng);
  fill(w.data(), rng);
  const Tensor4 y = kernels::conv_forward(x, w, p);
  Tensor4 dy(y.shape());
  fill(dy.data(), rng);

  std::printf("threads %d, batch %zu, channels %zu, size %zu\n", omp_get_max_threads(), batch, ch, hw);
  std::printf("%-22s %12s %12s %10s %12s\n", "kernel (f64)", "serial_ms", "parallel_ms", "speedup", "max_diff");
  const auto row = [](const char* name, double s, double q, double diff) {
    std::printf("%-22s %12.3f %12.3f %10.2f %12.3g\n", name, s, q, s / q, diff);
  };
  {
    Tensor4 a, b;
    const double s = best_ms(3, [&] { a = kernels::serial::conv_forward(x, w, p); });
    const double q = best_ms(3, [&] { b = kernels::conv_forward(x, w, p); });
    row("conv_forward", s, q, max_abs_diff(a, b));
  }
  {
    Tensor4 a, b;
    const double s = best_ms(3, [&] { a = kernels::serial::conv_backward_weight(x, dy, w.shape(), p); });
    const double q = best_ms(3, [&] { b = kernels::conv_backward_weight(x, dy, w.shape(), p); });
    row("conv_backward_weight", s, q, max_abs_diff(a, b));
  }
  {
    Tensor4 a, b;
    const double s = best_ms(3, [&] { a = kernels::serial::conv_backward_input(w, dy, x.shape(), p); });
    const double q = best_ms(3, [&] { b = kernels::conv_backward_input(w, dy, x.shape(), p); });
    row("conv_backward_input", s, q, max_abs_diff(a, b));
  }

  for (bool serial : {true, false}) {
    BenchSpec spec;
    spec.batch = batch;
    spec.channels = spec.filters = ch;
    spec.height = spec.width = hw;
    spec.repeats = 3;
    spec.serial = serial;
    std::printf("\ndense vs stripe-wise, f32, %s kernels\n%s", serial ? "serial" : "production",
                bench_csv(bench_kernels(spec, {0.0, 0.25, 0.5, 0.75, 0.9})).c_str());
  }
  return 0;
}
