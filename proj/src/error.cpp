#include "uabs/error.hpp"

namespace uabs {

const char* to_string(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::AllZero: return "AllZero";
    case ErrorCategory::NegativeWeight: return "NegativeWeight";
    case ErrorCategory::NonFinite: return "NonFinite";
    case ErrorCategory::OutOfVocab: return "OutOfVocab";
    case ErrorCategory::ShapeMismatch: return "ShapeMismatch";
    case ErrorCategory::UnknownInput: return "UnknownInput";
    case ErrorCategory::InvalidConfig: return "InvalidConfig";
    case ErrorCategory::NoFinishedHypothesis: return "NoFinishedHypothesis";
    case ErrorCategory::SearchSpaceTooLarge: return "SearchSpaceTooLarge";
    case ErrorCategory::UnsortedEdges: return "UnsortedEdges";
    case ErrorCategory::DegenerateVariance: return "DegenerateVariance";
    case ErrorCategory::WorldMismatch: return "WorldMismatch";
    case ErrorCategory::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorCategory::InvariantViolation: return "InvariantViolation";
    case ErrorCategory::Io: return "IO";
  }
  return "InvariantViolation";
}

}  // namespace uabs
