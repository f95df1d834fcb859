#pragma once

#include <stdexcept>
#include <string>

namespace fkp {

/// Input violates a documented precondition (bad grid, parameter out of range).
struct PreconditionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// An iterative method failed to converge or diverged.
struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A computed state left the range where results are trusted
/// (non-finite values, boundary gate, mass gate).
struct ValidityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fkp
