#pragma once

#include <stdexcept>
#include <string>

namespace uvqa {

// Every error carries a short machine-parsable kind ("dimension", "parse", ...)
// so the CLI can print a single-line "error[kind]: message".
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& m) : Error("dimension", m) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& m) : Error("numeric", m) {}
};

class ParseError : public Error {
 public:
  ParseError(const std::string& m, std::size_t line)
      : Error("parse", "line " + std::to_string(line) + ": " + m), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& m) : Error("io", m) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& m) : Error("validation", m) {}
};

}  // namespace uvqa
