#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace etm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t position, const std::string& message)
      : Error("parse error at " + std::to_string(position) + ": " + message),
        position_(position),
        message_(message) {}

  std::size_t position() const { return position_; }
  const std::string& message() const { return message_; }

 private:
  std::size_t position_;
  std::string message_;
};

// Column reference that is ambiguous or does not resolve in scope.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class UnknownTable : public SchemaError {
 public:
  explicit UnknownTable(const std::string& table) : SchemaError("unknown table: " + table) {}
};

class UnknownColumn : public SchemaError {
 public:
  UnknownColumn(const std::string& table, const std::string& column)
      : SchemaError("unknown column: " + table + "." + column) {}
};

class RewriteDivergence : public Error {
 public:
  using Error::Error;
};

class UnknownRule : public Error {
 public:
  explicit UnknownRule(int id) : Error("unknown rule id: " + std::to_string(id)) {}
};

class GenError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class AlignmentError : public Error {
 public:
  using Error::Error;
};

// Query outside the grammar accepted by the legacy set-matching metric.
class EsmParseError : public Error {
 public:
  using Error::Error;
};

enum class ExecErrorKind { kSyntax, kRuntime, kTimeout };

class ExecError : public Error {
 public:
  ExecError(ExecErrorKind kind, const std::string& message) : Error(message), kind_(kind) {}
  ExecErrorKind kind() const { return kind_; }

 private:
  ExecErrorKind kind_;
};

}  // namespace etm
