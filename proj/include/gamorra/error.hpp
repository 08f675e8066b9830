#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gamorra {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (trace lines, IL programs, config documents).
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// A record or model violates one of its structural invariants.
class InvariantError : public Error {
 public:
  using Error::Error;
};

// Not enough observations to perform the requested fit.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

// A lookup (shader id, opcode cost, stage function) failed.
class MissingDataError : public Error {
 public:
  using Error::Error;
};

}  // namespace gamorra
