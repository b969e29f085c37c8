#include "anchor/error.hpp"

namespace anchor {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotSingleValuedHere: return "NotSingleValuedHere";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::AdaptiveNeedsState: return "AdaptiveNeedsState";
    case ErrorCode::NonpositiveDenominator: return "NonpositiveDenominator";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::QuadratureUnstable: return "QuadratureUnstable";
    case ErrorCode::DenominatorVanished: return "DenominatorVanished";
    case ErrorCode::UnsupportedScheduleForExactBound: return "UnsupportedScheduleForExactBound";
    case ErrorCode::DisconnectedGraph: return "DisconnectedGraph";
    case ErrorCode::StepSizeTooLarge: return "StepSizeTooLarge";
    case ErrorCode::ConfigParseError: return "ConfigParseError";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

}  // namespace anchor
