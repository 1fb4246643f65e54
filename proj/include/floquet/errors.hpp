#pragma once

#include <stdexcept>
#include <string>

namespace floquet {

// Base error type. Every error carries a stable machine-readable category
// that the CLI maps to exit codes and prints alongside the message.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& message)
      : std::runtime_error(message), category_(std::move(category)) {}

  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

// A parameter set violates the sign conditions required for the balanced
// Floquet solution (some square root would be imaginary).
class InfeasibleParameters : public Error {
 public:
  explicit InfeasibleParameters(const std::string& message)
      : Error("infeasible-parameters", message) {}
};

// Two fields that must share a grid (and time) do not.
class GridMismatch : public Error {
 public:
  explicit GridMismatch(const std::string& message)
      : Error("grid-mismatch", message) {}
};

// A propagated field contains NaN or Inf; carries the time of failure.
class NonFiniteField : public Error {
 public:
  NonFiniteField(const std::string& message, double failure_time)
      : Error("non-finite-field", message), failure_time_(failure_time) {}

  double failure_time() const noexcept { return failure_time_; }

 private:
  double failure_time_;
};

// Linearized-operator coefficients requested at a time where grid points
// fall inside the zero-density neighborhood of a vortex node.
class SingularCoefficient : public Error {
 public:
  explicit SingularCoefficient(const std::string& message)
      : Error("singular-coefficient", message) {}
};

// Accumulated phase around a loop is not close to an integer multiple of
// 2*pi (under-sampling or multiple enclosed nodes).
class LoopAmbiguous : public Error {
 public:
  explicit LoopAmbiguous(const std::string& message)
      : Error("loop-ambiguous", message) {}
};

class ConfigParseError : public Error {
 public:
  explicit ConfigParseError(const std::string& message)
      : Error("config-parse", message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message)
      : Error("filesystem", message) {}
};

}  // namespace floquet
