#include "swp/dataset.hpp"

#include <fstream>
#include <iterator>

namespace swp {

const char* to_string(DatasetKind k) { return k == DatasetKind::mnist ? "mnist" : "cifar10"; }

DatasetKind parse_dataset_kind(const std::string& s) {
  if (s == "mnist") return DatasetKind::mnist;
  if (s == "cifar10" || s == "cifar-10") return DatasetKind::cifar10;
  throw UsageError("unknown dataset '" + s + "' (expected mnist or cifar10)");
}

Dataset Dataset::head(std::size_t n) const {
  if (n == 0 || n >= size()) return *this;
  Dataset d = *this;
  d.labels.resize(n);
  d.pixels.resize(n * image_size());
  return d;
}

DatasetSource DatasetSource::defaults(DatasetKind kind, std::filesystem::path directory) {
  DatasetSource s;
  s.kind = kind;
  s.directory = std::move(directory);
  if (kind == DatasetKind::mnist) {
    s.mean = {0.1307};
    s.stddev = {0.3081};
  } else {
    s.mean = {0.4914, 0.4822, 0.4465};
    s.stddev = {0.2470, 0.2435, 0.2616};
    s.random_crop = true;
    s.horizontal_flip = true;
  }
  return s;
}

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t at) {
  if (at + 4 > b.size()) throw FormatError("truncated IDX header", at);
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) | b[at + 3];
}

}  // namespace

Dataset read_mnist(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto img = read_file(images);
  const auto lbl = read_file(labels);
  if (be32(img, 0) != 0x00000803) throw FormatError("bad IDX image magic in " + images.string(), 0);
  if (be32(lbl, 0) != 0x00000801) throw FormatError("bad IDX label magic in " + labels.string(), 0);
  const std::size_t count = be32(img, 4), rows = be32(img, 8), cols = be32(img, 12);
  const std::size_t label_count = be32(lbl, 4);
  if (count != label_count)
    throw FormatError("image count " + std::to_string(count) + " does not match label count " + std::to_string(label_count), 4);
  if (img.size() != 16 + count * rows * cols) throw FormatError("IDX image payload size does not match header", 16);
  if (lbl.size() != 8 + count) throw FormatError("IDX label payload size does not match header", 8);
  Dataset d;
  d.channels = 1;
  d.height = rows;
  d.width = cols;
  d.pixels.assign(img.begin() + 16, img.end());
  d.labels.assign(lbl.begin() + 8, lbl.end());
  for (std::size_t k = 0; k < d.labels.size(); ++k)
    if (d.labels[k] > 9) throw FormatError("label out of range", 8 + k);
  return d;
}

Dataset read_cifar_batch(const std::filesystem::path& file, std::size_t expected_records) {
  constexpr std::size_t kRecord = 3073;
  const auto bytes = read_file(file);
  if (bytes.size() % kRecord != 0)
    throw FormatError(file.string() + " is not a whole number of 3073-byte records", bytes.size() - bytes.size() % kRecord);
  const std::size_t records = bytes.size() / kRecord;
  if (expected_records != 0 && records != expected_records)
    throw FormatError(file.string() + " holds " + std::to_string(records) + " records, expected " + std::to_string(expected_records), 0);
  Dataset d;
  d.channels = 3;
  d.height = 32;
  d.width = 32;
  d.labels.resize(records);
  d.pixels.resize(records * 3072);
  for (std::size_t r = 0; r < records; ++r) {
    const std::uint8_t* rec = bytes.data() + r * kRecord;
    if (rec[0] > 9) throw FormatError("label out of range", r * kRecord);
    d.labels[r] = rec[0];
    std::copy(rec + 1, rec + kRecord, d.pixels.begin() + static_cast<std::ptrdiff_t>(r * 3072));
  }
  return d;
}

namespace {

void append(Dataset& into, const Dataset& from) {
  if (into.labels.empty()) {
    into = from;
    return;
  }
  into.pixels.insert(into.pixels.end(), from.pixels.begin(), from.pixels.end());
  into.labels.insert(into.labels.end(), from.labels.begin(), from.labels.end());
}

}  // namespace

DatasetSplit load_dataset(const DatasetSource& source) {
  const auto& dir = source.directory;
  DatasetSplit split;
  if (source.kind == DatasetKind::mnist) {
    split.train = read_mnist(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
    split.test = read_mnist(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte");
  } else {
    for (int b = 1; b <= 5; ++b) append(split.train, read_cifar_batch(dir / ("data_batch_" + std::to_string(b) + ".bin")));
    split.test = read_cifar_batch(dir / "test_batch.bin");
  }
  if (source.mean.size() != split.train.channels || source.stddev.size() != split.train.channels)
    throw UsageError("normalization constants do not match the dataset channel count");
  return split;
}

Tensor4 make_batch(const Dataset& data, std::span<const std::size_t> indices, const DatasetSource& source,
                   std::mt19937_64* rng) {
  const std::size_t c = data.channels, h = data.height, w = data.width;
  Tensor4 batch({indices.size(), c, h, w});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const std::uint8_t* img = data.pixels.data() + indices[b] * data.image_size();
    std::ptrdiff_t dy = 0, dx = 0;
    bool flip = false;
    if (rng != nullptr) {
      // Fixed draw order per sample keeps runs reproducible.
      if (source.random_crop) {
        std::uniform_int_distribution<int> shift(-4, 4);
        dy = shift(*rng);
        dx = shift(*rng);
      }
      if (source.horizontal_flip) flip = std::uniform_int_distribution<int>(0, 1)(*rng) == 1;
    }
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double mean = source.mean[ch], inv_std = 1.0 / source.stddev[ch];
      const double pad_value = (0.0 - mean) * inv_std;
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) + dy;
          std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(flip ? w - 1 - x : x) + dx;
          double v = pad_value;
          if (sy >= 0 && sx >= 0 && sy < static_cast<std::ptrdiff_t>(h) && sx < static_cast<std::ptrdiff_t>(w))
            v = (img[(ch * h + static_cast<std::size_t>(sy)) * w + static_cast<std::size_t>(sx)] / 255.0 - mean) * inv_std;
          batch(b, ch, y, x) = v;
        }
    }
  }
  return batch;
}

std::vector<std::uint8_t> batch_labels(const Dataset& data, std::span<const std::size_t> indices) {
  std::vector<std::uint8_t> out(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) out[k] = data.labels[indices[k]];
  return out;
}

}  // namespace swp
