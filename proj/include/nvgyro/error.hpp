#pragma once

#include <atomic>
#include <stdexcept>
#include <string>

namespace nvgyro {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rejected input: out-of-domain parameters, malformed matrices, bad geometry.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Numerical failure inside a solver (no convergence, no attractor, stiffness).
class SolverError : public Error {
 public:
  enum class Kind { NoAttractor, StiffTrajectory, NoConvergence, Singular, LimitCycle, Mixing };
  SolverError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Process-wide warning sink. Warnings are printed to stderr and counted so the
/// CLI can report them in its exit summary.
void warn(const std::string& message);
std::size_t warning_count() noexcept;
void set_warnings_quiet(bool quiet) noexcept;

}  // namespace nvgyro
