#pragma once

#include <stdexcept>
#include <string>

namespace pmpthermo {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input outside the documented domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Dimension or shape mismatch between operators.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An isotherm segment requested against the direction of the dynamics.
class DirectionError : public Error {
 public:
  using Error::Error;
};

/// f(p; K) has no root for the requested K (K below the threshold K*).
class NoJumpPoints : public Error {
 public:
  using Error::Error;
};

/// No admissible plan connects the requested endpoints.
class Unreachable : public Error {
 public:
  using Error::Error;
};

/// No plan meets the requested deadline; carries the shortest feasible one.
class DeadlineInfeasible : public Unreachable {
 public:
  DeadlineInfeasible(const std::string& what, double minimal_time)
      : Unreachable(what), minimal_time_(minimal_time) {}
  double minimal_time() const noexcept { return minimal_time_; }

 private:
  double minimal_time_;
};

/// An iterative solver stopped without meeting its tolerance.
class SolverFailure : public Error {
 public:
  using Error::Error;
};

/// Adaptive integration failed; carries the time at which it stopped.
class IntegrationFailure : public Error {
 public:
  IntegrationFailure(const std::string& what, double time)
      : Error(what + " at t=" + std::to_string(time)), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

}  // namespace pmpthermo
