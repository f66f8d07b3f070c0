#pragma once

#include <stdexcept>
#include <string>

namespace ilvm {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operand shapes do not conform for an op. Message names the op and both shapes.
struct ShapeError : Error {
  using Error::Error;
};

// Input outside the mathematical domain of an op (log of nonpositive, etc).
struct DomainError : Error {
  using Error::Error;
};

// API misuse: a precondition stated in the contract was violated.
struct ContractError : Error {
  using Error::Error;
};

// A forward op produced NaN/Inf, or training hit a non-finite loss.
struct NumericError : Error {
  using Error::Error;
};

// File / stream problems: missing files, bad magic, truncation, version skew.
struct IoError : Error {
  using Error::Error;
};

// Experiment spec file is malformed or inconsistent.
struct SpecError : Error {
  using Error::Error;
};

}  // namespace ilvm
