#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mtml {

// Mirrors mtml_status in the C API; values must stay in sync.
enum class ErrorCode : int {
  kOk = 0,
  kInvalidArgument = 1,
  kDegenerateCamera = 2,
  kInvalidSample = 3,
  kInsufficientIdentities = 4,
  kParseError = 5,
  kUnsupportedVersion = 6,
  kShapeError = 7,
  kNoSuchHead = 8,
  kNumericFailure = 9,
  kIncompatibleCheckpoint = 10,
  kLabelOutOfRange = 11,
  kEmptyBatch = 12,
  kEmptyIdentity = 13,
  kStaleAssignment = 14,
  kIncompatibleArtifacts = 15,
  kIoError = 16,
  kMissingDumps = 17,
  kMissingGroundTruth = 18,
  kInternal = 19,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  // The message without the leading code string.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace mtml
