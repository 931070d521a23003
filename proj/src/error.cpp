#include "oeg/error.hpp"

namespace oeg {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::DegenerateShape: return "DegenerateShape";
    case ErrorKind::CutLocus: return "CutLocus";
    case ErrorKind::NotSPD: return "NotSPD";
    case ErrorKind::RateMismatch: return "RateMismatch";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::RankTooLow: return "RankTooLow";
    case ErrorKind::TooShort: return "TooShort";
    case ErrorKind::PriorMismatch: return "PriorMismatch";
    case ErrorKind::EmptyControls: return "EmptyControls";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::ZeroVariance: return "ZeroVariance";
    case ErrorKind::InvalidScore: return "InvalidScore";
    case ErrorKind::InsufficientCohort: return "InsufficientCohort";
    case ErrorKind::RankTooLarge: return "RankTooLarge";
    case ErrorKind::Format: return "Format";
    case ErrorKind::MissingArtifact: return "MissingArtifact";
    case ErrorKind::ConfigMismatch: return "ConfigMismatch";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace oeg
