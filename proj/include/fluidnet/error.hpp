#pragma once

#include <stdexcept>
#include <string>

namespace fluidnet {

/// Invalid input: a parameter out of range or a violated precondition.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Two objects live on incompatible cell or time grids.
class GridMismatch : public DomainError {
 public:
  using DomainError::DomainError;
};

/// A numerical procedure did not reach its stopping criterion.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fluidnet
