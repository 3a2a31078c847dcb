#include "probebench/error.hpp"

namespace probebench {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::MalformedCsv: return "MalformedCsv";
    case ErrorCode::UnknownTaskSuffix: return "UnknownTaskSuffix";
    case ErrorCode::NonBinaryLabel: return "NonBinaryLabel";
    case ErrorCode::EmptyAnnotationDir: return "EmptyAnnotationDir";
    case ErrorCode::FilterNameNotFound: return "FilterNameNotFound";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::InvalidValue: return "InvalidValue";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::WidthMismatch: return "WidthMismatch";
    case ErrorCode::MissingId: return "MissingId";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyFolds: return "EmptyFolds";
    case ErrorCode::MissingTaskRank: return "MissingTaskRank";
    case ErrorCode::DuplicateRecord: return "DuplicateRecord";
    case ErrorCode::UnknownPhase: return "UnknownPhase";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, std::string detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail),
      code_(code),
      detail_(std::move(detail)) {}

}  // namespace probebench
