#pragma once

#include <stdexcept>
#include <string>

namespace blindsr {

/// Shapes that do not line up (mismatched images, non-divisible scale, ...).
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A value outside the domain of a distribution or operator.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Non-finite values produced during optimization.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training loss blew up (non-finite or above the divergence threshold).
class DivergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class UnsupportedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace blindsr
