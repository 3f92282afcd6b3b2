#pragma once

#include <stdexcept>
#include <string>

namespace specvit {

/// Bad input: malformed files, contract violations by the caller, invalid
/// parameter combinations. The CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A malformed line in a text input. `line` is 1-based.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : ValidationError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Non-finite values appearing inside a numeric computation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace specvit
