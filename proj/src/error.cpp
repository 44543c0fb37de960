#include "aerovision/error.hpp"

namespace aerovision {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::MalformedImage: return "MalformedImage";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::ClassOverflow: return "ClassOverflow";
    case ErrorCode::BandIndexOutOfRange: return "BandIndexOutOfRange";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::DuplicateSampleId: return "DuplicateSampleId";
    case ErrorCode::InvalidK: return "InvalidK";
    case ErrorCode::SingularTransform: return "SingularTransform";
    case ErrorCode::DegenerateShear: return "DegenerateShear";
    case ErrorCode::CropTooLarge: return "CropTooLarge";
    case ErrorCode::NoEvaluableClass: return "NoEvaluableClass";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::TooFewFrames: return "TooFewFrames";
    case ErrorCode::MalformedTensor: return "MalformedTensor";
    case ErrorCode::EmptyWindow: return "EmptyWindow";
    case ErrorCode::ScriptDimensionMismatch: return "ScriptDimensionMismatch";
    case ErrorCode::MissingSource: return "MissingSource";
    case ErrorCode::SinkFailure: return "SinkFailure";
    case ErrorCode::BackendFailure: return "BackendFailure";
    case ErrorCode::NonMonotonicEpoch: return "NonMonotonicEpoch";
    case ErrorCode::EmptyScores: return "EmptyScores";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace aerovision
