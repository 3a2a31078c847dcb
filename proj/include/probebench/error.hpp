#pragma once

#include <stdexcept>
#include <string>

namespace probebench {

enum class ErrorCode {
  // ingest
  DimensionMismatch,
  NonFiniteValue,
  DuplicateId,
  MalformedCsv,
  UnknownTaskSuffix,
  NonBinaryLabel,
  EmptyAnnotationDir,
  FilterNameNotFound,
  UnknownKey,
  InvalidValue,
  // probe
  TooFewSamples,
  NonFiniteLoss,
  WidthMismatch,
  MissingId,
  // metrics / scoring
  LengthMismatch,
  EmptyFolds,
  MissingTaskRank,
  // leaderboard
  DuplicateRecord,
  UnknownPhase,
  IoFailure,
  // synth
  InvalidSpec,
};

const char* to_string(ErrorCode code) noexcept;

// Every recoverable failure in the engine is reported as an Error carrying a
// machine-readable code and a human-readable detail (offending id, key, path).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string detail);

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace probebench
