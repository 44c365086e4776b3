#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace altrec {

enum class ErrorKind {
  DegenerateExtent,
  EmptyMesh,
  EmptyInput,
  EmptySurface,
  IoError,
  LengthMismatch,
  MissingNormals,
  NotSymmetric,
  OutOfRange,
  ParseError,
  PointOutsideDomain,
  PreconditionViolation,
  SolverDiverged,
  TooFewPoints,
  UnsupportedFormat,
};

std::string_view to_string(ErrorKind kind);

/// Exception type thrown by every altrec operation. The kind is stable and
/// machine-readable; the message is for humans.
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& message,
        std::optional<std::size_t> index = std::nullopt)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind), index_(index) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// Offending element (point index, iteration index, line number) when the
  /// error is attributable to one.
  std::optional<std::size_t> index() const noexcept { return index_; }

private:
  ErrorKind kind_;
  std::optional<std::size_t> index_;
};

/// Raised by the Poisson solver. Carries the residual it did reach and, when
/// raised from inside an iterative loop, the iteration that failed.
class SolverDiverged : public Error {
public:
  SolverDiverged(double achieved_residual, int cg_iterations,
                 std::optional<std::size_t> outer_iteration = std::nullopt);

  double achieved_residual() const noexcept { return residual_; }
  int cg_iterations() const noexcept { return cg_iterations_; }

private:
  double residual_;
  int cg_iterations_;
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
  case ErrorKind::DegenerateExtent: return "DegenerateExtent";
  case ErrorKind::EmptyMesh: return "EmptyMesh";
  case ErrorKind::EmptyInput: return "EmptyInput";
  case ErrorKind::EmptySurface: return "EmptySurface";
  case ErrorKind::IoError: return "IoError";
  case ErrorKind::LengthMismatch: return "LengthMismatch";
  case ErrorKind::MissingNormals: return "MissingNormals";
  case ErrorKind::NotSymmetric: return "NotSymmetric";
  case ErrorKind::OutOfRange: return "OutOfRange";
  case ErrorKind::ParseError: return "ParseError";
  case ErrorKind::PointOutsideDomain: return "PointOutsideDomain";
  case ErrorKind::PreconditionViolation: return "PreconditionViolation";
  case ErrorKind::SolverDiverged: return "SolverDiverged";
  case ErrorKind::TooFewPoints: return "TooFewPoints";
  case ErrorKind::UnsupportedFormat: return "UnsupportedFormat";
  }
  return "Unknown";
}

inline SolverDiverged::SolverDiverged(double achieved_residual,
                                      int cg_iterations,
                                      std::optional<std::size_t> outer_iteration)
    : Error(ErrorKind::SolverDiverged,
            "relative residual " + std::to_string(achieved_residual) +
                " after " + std::to_string(cg_iterations) + " iterations" +
                (outer_iteration ? " (outer iteration " +
                                       std::to_string(*outer_iteration) + ")"
                                 : std::string()),
            outer_iteration),
      residual_(achieved_residual), cg_iterations_(cg_iterations) {}

} // namespace altrec
