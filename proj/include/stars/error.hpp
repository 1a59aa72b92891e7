#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stars {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed textual input. Carries the 1-based line number when known (0 otherwise).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Shapes or sizes that disagree with each other or with a header.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Binary payload shorter than its header promises.
class TruncationError : public Error {
 public:
  using Error::Error;
};

}  // namespace stars
