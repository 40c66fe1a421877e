#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace pvsizing {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter block violates its invariants (e.g. Faiman denominator <= 0).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data (ragged days, bad CSV rows, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

/// A statistical or least-squares fit could not be carried out.
class FitError : public Error {
 public:
  using Error::Error;
};

/// A model cannot be evaluated at the requested point (e.g. g(day) <= 0).
class ModelError : public Error {
 public:
  using Error::Error;
};

/// Rejection sampling ran out of attempts.
class SamplingError : public Error {
 public:
  SamplingError(const std::string& what, std::size_t attempts)
      : Error(what), attempts_(attempts) {}

  std::size_t attempts() const noexcept { return attempts_; }

 private:
  std::size_t attempts_;
};

/// Non-finite values or total underflow in a numerical routine.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// The hydraulic truth simulation failed (flow solver did not converge).
class SimulationError : public Error {
 public:
  using Error::Error;
};

/// Linear model identification failed (rank-deficient regressors).
class IdentificationError : public Error {
 public:
  using Error::Error;
};

/// MPC-level failure that the closed loop must handle (no fallback input).
class ControllerError : public Error {
 public:
  using Error::Error;
};

/// Periodic-trajectory or sizing optimisation failure.
class OptimizationError : public Error {
 public:
  using Error::Error;
};

/// Configuration problems; carries every violation found, not just the first.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const noexcept {
    return violations_;
  }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out = "invalid configuration:";
    for (const auto& s : v) {
      out += "\n  - ";
      out += s;
    }
    return out;
  }

  std::vector<std::string> violations_;
};

}  // namespace pvsizing
