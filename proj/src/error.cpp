#include "mtml/error.hpp"

namespace mtml {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kOk: return "ok";
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kDegenerateCamera: return "degenerate camera";
    case ErrorCode::kInvalidSample: return "invalid sample";
    case ErrorCode::kInsufficientIdentities: return "insufficient identities";
    case ErrorCode::kParseError: return "parse error";
    case ErrorCode::kUnsupportedVersion: return "unsupported format version";
    case ErrorCode::kShapeError: return "shape error";
    case ErrorCode::kNoSuchHead: return "no such head";
    case ErrorCode::kNumericFailure: return "numeric failure";
    case ErrorCode::kIncompatibleCheckpoint: return "incompatible checkpoint";
    case ErrorCode::kLabelOutOfRange: return "label out of range";
    case ErrorCode::kEmptyBatch: return "empty batch";
    case ErrorCode::kEmptyIdentity: return "empty identity";
    case ErrorCode::kStaleAssignment: return "stale assignment";
    case ErrorCode::kIncompatibleArtifacts: return "incompatible artifacts";
    case ErrorCode::kIoError: return "io error";
    case ErrorCode::kMissingDumps: return "missing dumps";
    case ErrorCode::kMissingGroundTruth: return "missing ground truth";
    case ErrorCode::kInternal: return "internal error";
  }
  return "unknown error";
}

}  // namespace mtml
