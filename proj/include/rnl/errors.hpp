#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rnl {

// Base of every error the library throws. kind() is a short stable token used
// by the CLI for its machine-parseable error prefix.
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
  explicit DimensionError(const std::string& message) : Error("dimension", message) {}
};

class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& message) : Error("argument", message) {}
};

class ContractError : public Error {
 public:
  explicit ContractError(const std::string& message) : Error("contract", message) {}
};

class UnsupportedOpError : public Error {
 public:
  explicit UnsupportedOpError(const std::string& message) : Error("unsupported-op", message) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& message) : Error("shape", message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("io", message) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("config", message) {}
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error("parse", "line " + std::to_string(line) + ": " + message), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace rnl
