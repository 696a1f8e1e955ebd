#pragma once

// Little-endian binary writer/reader with CRC32 framing, shared by the
// stripe-model and checkpoint formats.

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "swp/errors.hpp"

namespace swp::detail {

inline std::uint32_t crc32_of(const std::uint8_t* data, std::size_t len) {
  return static_cast<std::uint32_t>(crc32(crc32(0L, Z_NULL, 0), data, static_cast<uInt>(len)));
}

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void f32s(std::span<const double> vs) {
    for (double v : vs) f32(v);
  }
  void f64s(std::span<const double> vs) {
    for (double v : vs) f64(v);
  }
  std::size_t size() const { return buf_.size(); }
  /// Appends the CRC32 of everything written since `start`.
  void crc_from(std::size_t start) { u32(crc32_of(buf_.data() + start, buf_.size() - start)); }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  void le(std::uint64_t v, int bytes) {
    for (int b = 0; b < bytes; ++b) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  std::vector<std::uint8_t> buf_;
};

/// Bounds-checked reader; running past the end raises FormatError with the offset.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  void need(std::size_t n, const char* what) const {
    if (remaining() < n) throw FormatError(std::string("truncated file while reading ") + what, pos_);
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes_[pos_++];
  }
  std::uint16_t u16(const char* what) { return static_cast<std::uint16_t>(le(2, what)); }
  std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(le(4, what)); }
  std::int32_t i32(const char* what) { return static_cast<std::int32_t>(u32(what)); }
  double f32(const char* what) { return static_cast<double>(std::bit_cast<float>(u32(what))); }
  double f64(const char* what) { return std::bit_cast<double>(le(8, what)); }
  std::vector<double> f32s(std::size_t n, const char* what) {
    need(n * 4, what);
    std::vector<double> v(n);
    for (auto& x : v) x = f32(what);
    return v;
  }
  std::vector<double> f64s(std::size_t n, const char* what) {
    need(n * 8, what);
    std::vector<double> v(n);
    for (auto& x : v) x = f64(what);
    return v;
  }
  /// Reads a CRC32 and compares it against bytes [start, current offset).
  void check_crc(std::size_t start) {
    const std::size_t end = pos_;
    const auto stored = u32("checksum");
    if (stored != crc32_of(bytes_.data() + start, end - start)) throw IntegrityError("CRC32 mismatch", start);
  }

 private:
  std::uint64_t le(int bytes, const char* what) {
    need(static_cast<std::size_t>(bytes), what);
    std::uint64_t v = 0;
    for (int b = 0; b < bytes; ++b) v |= static_cast<std::uint64_t>(bytes_[pos_ + static_cast<std::size_t>(b)]) << (8 * b);
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace swp::detail
