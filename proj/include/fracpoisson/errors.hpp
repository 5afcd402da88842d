#pragma once

#include <stdexcept>
#include <string>

namespace fracpoisson {

/// Input violates a documented precondition (bad parameter, bad range).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An alternating series cancelled so badly that the requested accuracy
/// cannot be certified.
class PrecisionLossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A series reached its term budget before the truncation bound was met.
class NonConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Adaptive quadrature exhausted its panel budget above the requested
/// tolerance.
class ToleranceNotMetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A scaling-curve point failed to satisfy n = Lambda(z0 t^beta).
class ConstraintError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fracpoisson
