#pragma once

#include <stdexcept>
#include <string>

namespace redda {

// Raised when input data cannot be parsed or is dimensionally inconsistent.
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when a requested configuration cannot produce a valid fit,
// e.g. the retained count after trimming is below G*(p+1).
class InfeasibleConfigError : public std::runtime_error {
public:
  explicit InfeasibleConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when estimation collapses: emptied class, singular scatter under a
// model that needs its inverse, non-finite likelihood, or all restarts failing.
class DegenerateFitError : public std::runtime_error {
public:
  explicit DegenerateFitError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when a constrained-maximization loop exhausts its iteration cap
// without satisfying the eigenvalue-ratio restriction.
class ConstraintConvergenceError : public std::runtime_error {
public:
  explicit ConstraintConvergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace redda
