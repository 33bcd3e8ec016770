#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace tutor {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad caller input. `field` names the offending field when there is one.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& message)
      : Error(message), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

// Malformed input file; line numbers are 1-based and count the header.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::string column, const std::string& message)
      : Error("line " + std::to_string(line) + (column.empty() ? "" : ", column '" + column + "'") +
              ": " + message),
        line_(line),
        column_(std::move(column)) {}

  std::size_t line() const { return line_; }
  const std::string& column() const { return column_; }

 private:
  std::size_t line_;
  std::string column_;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

}  // namespace tutor
