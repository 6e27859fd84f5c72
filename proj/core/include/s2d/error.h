#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace s2d {

enum class ErrorCode {
  kInvalidArgument,
  kPointBehindCamera,
  kKeypointOutOfBounds,
  kInsufficientSamples,
  kDimensionTooLarge,
  kDimensionMismatch,
  kDegenerateDescriptor,
  kEmptyDatabase,
  kChannelMismatch,
  kLengthMismatch,
  kDegenerateConfiguration,
  kNoRealSolution,
  kTooFewCorrespondences,
  kMissingGroundTruth,
  kUnsatisfiableVisibility,
  kBadMagic,
  kTruncatedPayload,
  kDimOverflow,
  kParse,
  kIo,
};

std::string_view ErrorCodeName(ErrorCode code);

// Every failure surfaced by the library carries one of the codes above so
// callers (and the CLI exit-code mapping) can branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

#define S2D_CHECK(cond, code, msg)         \
  do {                                     \
    if (!(cond)) {                         \
      throw ::s2d::Error((code), (msg));   \
    }                                      \
  } while (false)

}  // namespace s2d
