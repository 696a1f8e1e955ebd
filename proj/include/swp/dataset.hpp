#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "swp/tensor.hpp"

namespace swp {

enum class DatasetKind { mnist, cifar10 };

const char* to_string(DatasetKind k);
DatasetKind parse_dataset_kind(const std::string& s);

/// Images as raw bytes in (N, C, H, W) order plus one label byte each.
struct Dataset {
  std::size_t channels = 0, height = 0, width = 0;
  std::vector<std::uint8_t> pixels;
  std::vector<std::uint8_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t image_size() const noexcept { return channels * height * width; }
  /// First `n` samples (all if n == 0 or n >= size()).
  Dataset head(std::size_t n) const;
};

struct DatasetSplit {
  Dataset train, test;
};

struct DatasetSource {
  DatasetKind kind = DatasetKind::mnist;
  std::filesystem::path directory;
  std::vector<double> mean, stddev;  // per channel, applied after scaling to [0, 1]
  bool random_crop = false;          // pad 4, random crop back to size
  bool horizontal_flip = false;

  /// Standard normalization constants; CIFAR-10 also enables augmentation.
  static DatasetSource defaults(DatasetKind kind, std::filesystem::path directory);
};

/// IDX files: magic 0x00000803 (images) / 0x00000801 (labels), big-endian dims.
Dataset read_mnist(const std::filesystem::path& images, const std::filesystem::path& labels);

/// CIFAR-10 binary batch: 3073-byte records (label, 3072 pixels in CHW order).
/// `expected_records` of 0 accepts any whole number of records.
Dataset read_cifar_batch(const std::filesystem::path& file, std::size_t expected_records = 10000);

/// Loads the train/test split from the conventional file names.
DatasetSplit load_dataset(const DatasetSource& source);

/// Normalized batch of the given samples. With `rng`, training augmentation
/// from `source` is applied; without it only normalization is.
Tensor4 make_batch(const Dataset& data, std::span<const std::size_t> indices, const DatasetSource& source,
                   std::mt19937_64* rng = nullptr);

std::vector<std::uint8_t> batch_labels(const Dataset& data, std::span<const std::size_t> indices);

}  // namespace swp
