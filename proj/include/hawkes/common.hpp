#pragma once

#include <stdexcept>
#include <string>

namespace hawkes {

inline constexpr const char* library_version = "0.1.0";

// Error taxonomy, mapped to CLI exit codes by the command-line layer:
// UsageError -> 1 (bad invocation), DataError -> 2 (malformed or inconsistent
// input), NumericalError -> 3 (instability, divergence, non-convergence).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside a transform's convergence region or a function's domain.
class DomainError : public DataError {
 public:
  using DataError::DataError;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Stationarity violation; carries the offending spectral radius so callers can
// report how far past the boundary the configuration sits.
class StabilityError : public NumericalError {
 public:
  StabilityError(const std::string& what, double spectral_radius)
      : NumericalError(what), spectral_radius_(spectral_radius) {}
  [[nodiscard]] double spectral_radius() const { return spectral_radius_; }

 private:
  double spectral_radius_{0};
};

}  // namespace hawkes
