#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace swp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or layer dimensions do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An operation was invoked under the wrong sparsity mode.
class ModeError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents. `offset` is the byte position where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Checksum mismatch on a record that otherwise parsed.
class IntegrityError : public Error {
 public:
  IntegrityError(const std::string& what, std::size_t offset)
      : Error(what + " (record at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class DivergedError : public Error {
 public:
  explicit DivergedError(std::size_t epoch)
      : Error("training diverged (non-finite loss) in epoch " + std::to_string(epoch)), epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

[[noreturn]] void contract_violation(const char* expr, const char* file, int line);

}  // namespace swp

// Always-on precondition check; violations abort rather than throw.
#define SWP_EXPECTS(cond) \
  ((cond) ? static_cast<void>(0) : ::swp::contract_violation(#cond, __FILE__, __LINE__))
