// Copyright 2026 The hasvq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hasvq {

enum class ErrorCode {
  kInvalidArgument,
  kValidation,
  kShapeMismatch,
  kRange,
  kIo,
  kMalformedHeader,
  kOutOfBounds,
  kUnsupportedDtype,
  kBadMagic,
  kBadVersion,
  kTruncated,
  kOverlappingSections,
  kCorruptPayload,
};

/// Stable, human-readable name used as the message prefix.
std::string_view error_name(ErrorCode code);

/// Every failure raised by the library carries one of the named codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hasvq
