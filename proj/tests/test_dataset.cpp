#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "support.hpp"
#include "swp/dataset.hpp"

using namespace swp;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("swp_ds_" + std::to_string(std::random_device{}()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void put_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}

std::vector<std::uint8_t> idx_images(std::uint32_t magic, std::uint32_t n, std::uint32_t h, std::uint32_t w,
                                     std::uint8_t fill) {
  std::vector<std::uint8_t> b;
  put_be32(b, magic);
  put_be32(b, n);
  put_be32(b, h);
  put_be32(b, w);
  for (std::uint32_t k = 0; k < n * h * w; ++k) b.push_back(static_cast<std::uint8_t>(fill + k));
  return b;
}

std::vector<std::uint8_t> idx_labels(std::uint32_t magic, const std::vector<std::uint8_t>& labels) {
  std::vector<std::uint8_t> b;
  put_be32(b, magic);
  put_be32(b, static_cast<std::uint32_t>(labels.size()));
  b.insert(b.end(), labels.begin(), labels.end());
  return b;
}

}  // namespace

TEST_CASE("IDX files with magic 2051 and 2049 parse bit-exactly") {
  TempDir dir;
  write(dir.path / "i", idx_images(2051, 3, 2, 4, 7));
  write(dir.path / "l", idx_labels(2049, {3, 0, 9}));
  const Dataset d = read_mnist(dir.path / "i", dir.path / "l");
  CHECK(d.size() == 3);
  CHECK(d.channels == 1);
  CHECK(d.height == 2);
  CHECK(d.width == 4);
  CHECK(d.labels == std::vector<std::uint8_t>{3, 0, 9});
  REQUIRE(d.pixels.size() == 24);
  for (std::size_t k = 0; k < 24; ++k) CHECK(d.pixels[k] == 7 + k);
}

TEST_CASE("IDX errors") {
  TempDir dir;
  write(dir.path / "l", idx_labels(2049, {1, 2}));
  write(dir.path / "i", idx_images(2049, 2, 2, 2, 0));
  CHECK_THROWS_AS(read_mnist(dir.path / "i", dir.path / "l"), FormatError);
  write(dir.path / "i", idx_images(2051, 3, 2, 2, 0));
  CHECK_THROWS_AS(read_mnist(dir.path / "i", dir.path / "l"), FormatError);
  auto short_img = idx_images(2051, 2, 2, 2, 0);
  short_img.pop_back();
  write(dir.path / "i", short_img);
  CHECK_THROWS_AS(read_mnist(dir.path / "i", dir.path / "l"), FormatError);
  write(dir.path / "i", {0, 0, 8});
  CHECK_THROWS_AS(read_mnist(dir.path / "i", dir.path / "l"), FormatError);
  write(dir.path / "i", idx_images(2051, 2, 2, 2, 0));
  write(dir.path / "l", idx_labels(2049, {1, 12}));
  CHECK_THROWS_AS(read_mnist(dir.path / "i", dir.path / "l"), FormatError);
  CHECK_THROWS_AS(read_mnist(dir.path / "missing", dir.path / "l"), IoError);
}

TEST_CASE("a synthetic two-record CIFAR batch round-trips") {
  TempDir dir;
  std::vector<std::uint8_t> bytes;
  test::Rng rng(101);
  std::vector<std::uint8_t> expected;
  for (std::uint8_t label : {6, 2}) {
    bytes.push_back(label);
    for (int k = 0; k < 3072; ++k) {
      const auto v = static_cast<std::uint8_t>(rng());
      bytes.push_back(v);
      expected.push_back(v);
    }
  }
  write(dir.path / "b.bin", bytes);
  const Dataset d = read_cifar_batch(dir.path / "b.bin", 2);
  CHECK(d.labels == std::vector<std::uint8_t>{6, 2});
  CHECK(d.pixels == expected);
  CHECK(d.channels == 3);
  CHECK(d.height == 32);
  CHECK(read_cifar_batch(dir.path / "b.bin", 0).size() == 2);
  CHECK_THROWS_AS(read_cifar_batch(dir.path / "b.bin"), FormatError);
  bytes.pop_back();
  write(dir.path / "b.bin", bytes);
  CHECK_THROWS_AS(read_cifar_batch(dir.path / "b.bin", 0), FormatError);
}

TEST_CASE("batches are normalized and test batches are never augmented") {
  Dataset d;
  d.channels = 3;
  d.height = d.width = 4;
  test::Rng rng(102);
  for (int k = 0; k < 2 * 48; ++k) d.pixels.push_back(static_cast<std::uint8_t>(rng()));
  d.labels = {1, 4};
  const DatasetSource src = DatasetSource::defaults(DatasetKind::cifar10, "");
  const std::vector<std::size_t> idx{1, 0};
  const Tensor4 plain = make_batch(d, idx, src);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 4; ++x) {
          const double raw = d.pixels[idx[b] * 48 + (c * 4 + y) * 4 + x] / 255.0;
          REQUIRE(plain(b, c, y, x) == doctest::Approx((raw - src.mean[c]) / src.stddev[c]).epsilon(1e-12));
        }
  CHECK(make_batch(d, idx, src) == plain);
  CHECK(batch_labels(d, idx) == std::vector<std::uint8_t>{4, 1});

  // Augmented batches differ for some seed but every value is a normalized pixel or the pad value.
  bool differed = false;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 aug(seed);
    const Tensor4 a = make_batch(d, idx, src, &aug);
    differed |= !(a == plain);
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < 4; ++y)
          for (std::size_t x = 0; x < 4; ++x) {
            const double raw = a(b, c, y, x) * src.stddev[c] + src.mean[c];
            REQUIRE(std::abs(raw * 255.0 - std::round(raw * 255.0)) < 1e-9);
          }
  }
  CHECK(differed);

  // MNIST defaults carry no augmentation even with an rng.
  Dataset m = d;
  m.channels = 1;
  m.height = m.width = 6;
  m.pixels.resize(2 * 36);
  const DatasetSource ms = DatasetSource::defaults(DatasetKind::mnist, "");
  std::mt19937_64 aug(3);
  CHECK(make_batch(m, idx, ms, &aug) == make_batch(m, idx, ms));
}

TEST_CASE("head keeps the first samples") {
  Dataset d;
  d.channels = 1;
  d.height = d.width = 2;
  d.pixels = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  d.labels = {1, 2, 3};
  const Dataset h = d.head(2);
  CHECK(h.labels == std::vector<std::uint8_t>{1, 2});
  CHECK(h.pixels.size() == 8);
  CHECK(d.head(0).size() == 3);
  CHECK(d.head(7).size() == 3);
}

TEST_CASE("dataset kind names") {
  CHECK(parse_dataset_kind("mnist") == DatasetKind::mnist);
  CHECK(parse_dataset_kind("cifar10") == DatasetKind::cifar10);
  CHECK_THROWS_AS(parse_dataset_kind("imagenet"), UsageError);
}

TEST_CASE("bundled MNIST subset loads") {
  const DatasetSplit s = load_dataset(DatasetSource::defaults(DatasetKind::mnist, SWP_DATA_DIR));
  CHECK(s.train.size() == 4000);
  CHECK(s.test.size() == 1000);
  CHECK(s.train.height == 28);
  std::array<std::size_t, 10> counts{};
  for (auto l : s.test.labels) ++counts[l];
  for (auto c : counts) CHECK(c > 50);
  CHECK_THROWS_AS(load_dataset(DatasetSource::defaults(DatasetKind::mnist, "/nonexistent")), IoError);
}
