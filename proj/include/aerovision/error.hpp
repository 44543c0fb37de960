#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace aerovision {

enum class ErrorCode {
  MissingFile,
  MalformedImage,
  IoFailure,
  ClassOverflow,
  BandIndexOutOfRange,
  SchemaViolation,
  DuplicateSampleId,
  InvalidK,
  SingularTransform,
  DegenerateShear,
  CropTooLarge,
  NoEvaluableClass,
  DimensionMismatch,
  EmptyMatrix,
  TooFewFrames,
  MalformedTensor,
  EmptyWindow,
  ScriptDimensionMismatch,
  MissingSource,
  SinkFailure,
  BackendFailure,
  NonMonotonicEpoch,
  EmptyScores,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace aerovision
