#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace surfcomm {

/// Base class for every error raised by the toolchain.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed circuit text. Carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A precondition on an operation's inputs does not hold.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Physical error rate at or above threshold: no code distance suffices.
class UncorrectableTechnology : public Error {
 public:
  using Error::Error;
};

/// A simulator failed to make progress or detected an inconsistent state.
class SimulationError : public Error {
 public:
  using Error::Error;
};

}  // namespace surfcomm
