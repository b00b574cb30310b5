#pragma once

#include <stdexcept>
#include <string>

namespace coxstaff {

/// Parameter outside its admissible domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Lag too large for the number of slots in the cycle.
class ConstraintError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// A series or search did not reach its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace coxstaff
