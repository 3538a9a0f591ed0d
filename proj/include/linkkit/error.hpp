#pragma once

#include <stdexcept>
#include <string>

namespace linkkit {

/// Base of every error raised by the library. The CLI maps the concrete
/// subclass onto a process exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

/// Malformed, inconsistent, or missing data.
class DataError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public DataError {
 public:
  SchemaError(std::size_t line, const std::string& field, const std::string& what)
      : DataError("line " + std::to_string(line) + ", field '" + field + "': " + what),
        line_(line),
        field_(field) {}

  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

class AuditError : public DataError {
 public:
  using DataError::DataError;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class NetworkError : public Error {
 public:
  using Error::Error;
};

class AuthError : public NetworkError {
 public:
  using NetworkError::NetworkError;
};

}  // namespace linkkit
