#include "g2sim/errors.hpp"

namespace g2sim {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DegenerateRates: return "DegenerateRates";
    case ErrorKind::InvalidInversion: return "InvalidInversion";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::IntegrationFailure: return "IntegrationFailure";
    case ErrorKind::InvalidGeometry: return "InvalidGeometry";
    case ErrorKind::UnknownScenario: return "UnknownScenario";
    case ErrorKind::EmptyStream: return "EmptyStream";
    case ErrorKind::UnsortedInput: return "UnsortedInput";
    case ErrorKind::SymmetryViolation: return "SymmetryViolation";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace g2sim
