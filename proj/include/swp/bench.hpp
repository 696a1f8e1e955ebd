#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace swp {

struct BenchSpec {
  std::size_t batch = 8, channels = 64, filters = 64, kernel = 3, height = 32, width = 32, stride = 1;
  std::size_t repeats = 5;  // best-of
  std::uint64_t seed = 0;
  bool serial = false;      // time the reference loop nests instead of the production kernels
};

struct BenchRow {
  double sparsity = 0.0;  // fraction of stripes removed
  double dense_ms = 0.0, stripe_ms = 0.0;
  double max_diff = 0.0;
  bool checksum_ok = false;  // max |dense - stripe| <= 1e-6
};

/// Dense vs stripe-wise f32 forward on synthetic data, one thread. The dense
/// path runs on weights with the removed stripes zeroed, so both kernels
/// compute the same function.
std::vector<BenchRow> bench_kernels(const BenchSpec& spec, const std::vector<double>& sparsity_grid);

/// `sparsity,dense_ms,stripe_ms,checksum_ok`
std::string bench_csv(const std::vector<BenchRow>& rows);

}  // namespace swp
