#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace canids {

/// Base for every error the toolkit raises on bad input data. The CLI maps
/// these to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A CAN frame that cannot be a UAVCAN frame at all (e.g. no tail byte).
class MalformedFrame : public DataError {
 public:
  using DataError::DataError;
};

/// A log line that does not follow the canonical CSV grammar.
class MalformedLine : public DataError {
 public:
  MalformedLine(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// File could not be opened, read, or written.
class IoError : public DataError {
 public:
  using DataError::DataError;
};

/// Timestamps went backwards in a stream that must be non-decreasing.
class TimestampRegression : public DataError {
 public:
  using DataError::DataError;
};

/// Parameter shapes or feature widths do not line up.
class ShapeError : public DataError {
 public:
  using DataError::DataError;
};

/// Invalid configuration value (out of range, unknown name, ...).
class ConfigError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace canids
