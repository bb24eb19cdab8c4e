#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace csisense {

// Base of every error the toolkit throws. Callers that only care about
// "bad input vs. bug" can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed container: bad magic, bad header, bad label code.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Payload shorter than its header promises.
class TruncationError : public FormatError {
 public:
  TruncationError(const std::string& what, std::size_t expected, std::size_t actual)
      : FormatError(what + " (expected " + std::to_string(expected) + " bytes, got " +
                    std::to_string(actual) + ")"),
        expected_(expected),
        actual_(actual) {}

  std::size_t expected() const noexcept { return expected_; }
  std::size_t actual() const noexcept { return actual_; }

 private:
  std::size_t expected_;
  std::size_t actual_;
};

// Well-formed file we deliberately do not handle (Fortran order, odd dtype).
class UnsupportedError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Tensor shape is not one of the accepted layouts.
class ShapeError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Non-finite or out-of-range values.
class DataError : public Error {
 public:
  using Error::Error;
};

// Vector/matrix size mismatch at an API boundary.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Training data that cannot define the model (single class, too few samples).
class DegenerateDataError : public Error {
 public:
  using Error::Error;
};

// Dataset does not satisfy the evaluation protocol.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  IoError(const std::string& what, std::size_t bytes_written)
      : Error(what + " after " + std::to_string(bytes_written) + " bytes"),
        bytes_written_(bytes_written) {}

  std::size_t bytes_written() const noexcept { return bytes_written_; }

 private:
  std::size_t bytes_written_;
};

}  // namespace csisense
