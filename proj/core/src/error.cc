#include "s2d/error.h"

namespace s2d {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kPointBehindCamera: return "PointBehindCamera";
    case ErrorCode::kKeypointOutOfBounds: return "KeypointOutOfBounds";
    case ErrorCode::kInsufficientSamples: return "InsufficientSamples";
    case ErrorCode::kDimensionTooLarge: return "DimensionTooLarge";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kDegenerateDescriptor: return "DegenerateDescriptor";
    case ErrorCode::kEmptyDatabase: return "EmptyDatabase";
    case ErrorCode::kChannelMismatch: return "ChannelMismatch";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kDegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::kNoRealSolution: return "NoRealSolution";
    case ErrorCode::kTooFewCorrespondences: return "TooFewCorrespondences";
    case ErrorCode::kMissingGroundTruth: return "MissingGroundTruth";
    case ErrorCode::kUnsatisfiableVisibility: return "UnsatisfiableVisibility";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kTruncatedPayload: return "TruncatedPayload";
    case ErrorCode::kDimOverflow: return "DimOverflow";
    case ErrorCode::kParse: return "Parse";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

}  // namespace s2d
