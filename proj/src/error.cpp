// Copyright 2026 The hasvq Authors
// SPDX-License-Identifier: Apache-2.0

#include "hasvq/error.hpp"

namespace hasvq {

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kValidation: return "validation error";
    case ErrorCode::kShapeMismatch: return "shape mismatch";
    case ErrorCode::kRange: return "range error";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kMalformedHeader: return "malformed header";
    case ErrorCode::kOutOfBounds: return "offset out of bounds";
    case ErrorCode::kUnsupportedDtype: return "unsupported dtype";
    case ErrorCode::kBadMagic: return "bad magic";
    case ErrorCode::kBadVersion: return "bad version";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kOverlappingSections: return "overlapping sections";
    case ErrorCode::kCorruptPayload: return "corrupt payload";
  }
  return "unknown error";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(error_name(code)) + ": " + detail), code_(code) {}

}  // namespace hasvq
