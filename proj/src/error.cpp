#include "nlsvd/error.hpp"

#include <sstream>

namespace nlsvd {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorKind::EmptyGainSample: return "EmptyGainSample";
    case ErrorKind::InvalidSlack: return "InvalidSlack";
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::GainViolation: return "GainViolation";
    case ErrorKind::OffManifoldDegenerate: return "OffManifoldDegenerate";
    case ErrorKind::TrainingDiverged: return "TrainingDiverged";
    case ErrorKind::InvalidScale: return "InvalidScale";
    case ErrorKind::DegenerateDirection: return "DegenerateDirection";
    case ErrorKind::DegenerateDataset: return "DegenerateDataset";
    case ErrorKind::FormatError: return "FormatError";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

namespace {
std::string gain_violation_message(double gamma) {
  std::ostringstream os;
  os.precision(17);
  os << "slack residual gamma = " << gamma
     << " is not positive; estimated gains are too small at this input";
  return os.str();
}
}  // namespace

GainViolation::GainViolation(std::vector<double> point, double gamma)
    : Error(ErrorKind::GainViolation, gain_violation_message(gamma)),
      point_(std::move(point)),
      gamma_(gamma) {}

}  // namespace nlsvd
