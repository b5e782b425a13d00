#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vlad {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invariant violation on a constructed value.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed input while decoding a file; carries the 1-based line and the
/// JSON field path of the offending value.
class SchemaError : public Error {
 public:
  SchemaError(std::size_t line, std::string field, const std::string& what)
      : Error("line " + std::to_string(line) + ": field '" + field + "': " + what),
        line_(line),
        field_(std::move(field)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Failure talking to an external meta-action oracle.
class OracleError : public Error {
 public:
  enum class Kind { Spawn, Io, Timeout, Malformed, UnknownLabel };

  OracleError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace vlad
