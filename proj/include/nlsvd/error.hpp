#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nlsvd {

enum class ErrorKind {
  InvalidInput,
  ConvergenceFailure,
  EmptyGainSample,
  InvalidSlack,
  DegenerateInput,
  GainViolation,
  OffManifoldDegenerate,
  TrainingDiverged,
  InvalidScale,
  DegenerateDirection,
  DegenerateDataset,
  FormatError,
  ConfigError,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Base of every error raised by the library. The kind is stable and is what
// the CLI reports in its machine-readable error document.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::string_view name() const noexcept { return to_string(kind_); }

 private:
  ErrorKind kind_;
};

class ConvergenceFailure : public Error {
 public:
  ConvergenceFailure(const std::string& message, double residual)
      : Error(ErrorKind::ConvergenceFailure, message), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

// Raised by the lift when the slack residual is not positive, i.e. the
// estimated gains do not upper-bound the observed ratio at `point`.
class GainViolation : public Error {
 public:
  GainViolation(std::vector<double> point, double gamma);
  const std::vector<double>& point() const noexcept { return point_; }
  double gamma() const noexcept { return gamma_; }

 private:
  std::vector<double> point_;
  double gamma_;
};

}  // namespace nlsvd
