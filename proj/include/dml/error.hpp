#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dml {

enum class ErrorCode {
  invalid_input,
  undefined_metric,
  diverged_training,
  unsupported_format,
  parse_error,
  schema_error,
  io_error,
};

const char* to_string(ErrorCode code) noexcept;

/// Base exception for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class InvalidInput : public Error {
 public:
  explicit InvalidInput(const std::string& message)
      : Error(ErrorCode::invalid_input, message) {}
};

class UndefinedMetric : public Error {
 public:
  explicit UndefinedMetric(const std::string& message)
      : Error(ErrorCode::undefined_metric, message) {}
};

/// Raised when a training loss becomes non-finite.
class DivergedTraining : public Error {
 public:
  DivergedTraining(const std::string& what_model, std::size_t epoch)
      : Error(ErrorCode::diverged_training,
              what_model + ": loss became non-finite at epoch " + std::to_string(epoch)),
        epoch_(epoch) {}

  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

class UnsupportedFormat : public Error {
 public:
  explicit UnsupportedFormat(const std::string& message)
      : Error(ErrorCode::unsupported_format, message) {}
};

/// Malformed model file; offset is the byte position of the offending token.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t byte_offset)
      : Error(ErrorCode::parse_error,
              message + " (at byte offset " + std::to_string(byte_offset) + ")"),
        offset_(byte_offset) {}

  std::size_t byte_offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// CSV schema violation. Row and column are 1-based; 0 means "not applicable".
class SchemaError : public Error {
 public:
  SchemaError(const std::string& message, std::size_t row = 0, std::size_t column = 0)
      : Error(ErrorCode::schema_error, decorate(message, row, column)),
        row_(row),
        column_(column) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  static std::string decorate(const std::string& message, std::size_t row, std::size_t column) {
    if (row == 0) return message;
    return message + " (row " + std::to_string(row) + ", column " + std::to_string(column) + ")";
  }

  std::size_t row_;
  std::size_t column_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error(ErrorCode::io_error, message) {}
};

}  // namespace dml
