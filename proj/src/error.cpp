#include "phrec/error.hpp"

namespace phrec {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotSquare: return "NotSquare";
    case ErrorCode::SignViolation: return "SignViolation";
    case ErrorCode::RowSumPositive: return "RowSumPositive";
    case ErrorCode::AllRowsConservative: return "AllRowsConservative";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::Singular: return "Singular";
    case ErrorCode::InvalidDistribution: return "InvalidDistribution";
    case ErrorCode::NegativeTime: return "NegativeTime";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::ZeroProbabilityStage: return "ZeroProbabilityStage";
    case ErrorCode::InvalidModel: return "InvalidModel";
    case ErrorCode::SequenceExplosion: return "SequenceExplosion";
    case ErrorCode::StepSizeUnderflow: return "StepSizeUnderflow";
    case ErrorCode::NonFiniteRate: return "NonFiniteRate";
    case ErrorCode::BadInterval: return "BadInterval";
    case ErrorCode::NonPositiveLikelihood: return "NonPositiveLikelihood";
    case ErrorCode::AllStartsFailed: return "AllStartsFailed";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::BootstrapFailed: return "BootstrapFailed";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::InconsistentPair: return "InconsistentPair";
    case ErrorCode::NonmonotoneInterval: return "NonmonotoneInterval";
    case ErrorCode::MalformedDocument: return "MalformedDocument";
    case ErrorCode::UnknownFlag: return "UnknownFlag";
  }
  return "Unknown";
}

bool is_numerical(ErrorCode code) {
  switch (code) {
    case ErrorCode::Overflow:
    case ErrorCode::Singular:
    case ErrorCode::SequenceExplosion:
    case ErrorCode::StepSizeUnderflow:
    case ErrorCode::NonFiniteRate:
    case ErrorCode::NonPositiveLikelihood:
    case ErrorCode::AllStartsFailed:
    case ErrorCode::BootstrapFailed:
    case ErrorCode::ZeroProbabilityStage:
      return true;
    default:
      return false;
  }
}

Error::Error(ErrorCode code, std::string_view module, const std::string& detail)
    : std::runtime_error(std::string(module) + ": " + std::string(to_string(code)) +
                         (detail.empty() ? "" : " (" + detail + ")")),
      code_(code),
      module_(module) {}

}  // namespace phrec
