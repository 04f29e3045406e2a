#ifndef CFSM_ERRORS_HPP
#define CFSM_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cfsm {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed argument: dimension mismatch, index out of range, non-finite input.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Operation invoked at a stage where it is undefined (e.g. the estimator at i < 2).
class InvalidStage : public Error {
 public:
  using Error::Error;
};

/// Solver or experiment configuration that violates its invariants.
class InvalidConfig : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or a failed factorization.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// An oracle was handed a state that the algorithm cannot reach.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A checked run-time invariant did not hold (negative gap, decreasing FO count, ...).
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace cfsm

#endif  // CFSM_ERRORS_HPP
