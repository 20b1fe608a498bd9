#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dtc {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An argument is outside its documented domain.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A normal-equation system has no unique solution.
class SingularSystemError : public Error {
 public:
  SingularSystemError(const std::string& what, std::size_t row)
      : Error(what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

/// A non-finite value appeared in the iterates.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t iteration)
      : Error(what), iteration_(iteration) {}
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

/// Inputs violate a documented precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Factor alignment could not match columns unambiguously.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A controller tried to message an area it is not adjacent to.
class TopologyError : public Error {
 public:
  using Error::Error;
};

/// A round barrier was reached with a neighbor's message missing.
class DeadlockError : public Error {
 public:
  DeadlockError(const std::string& what, std::size_t round)
      : Error(what), round_(round) {}
  std::size_t round() const noexcept { return round_; }

 private:
  std::size_t round_;
};

}  // namespace dtc
