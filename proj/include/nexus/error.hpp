// Copyright 2026 The Nexus Simulator Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace nexus {

enum class ErrorCode {
  kCapacityExceeded,
  kCycleDetected,
  kEmptyDescriptor,
  kUnplacedElement,
  kAddressOutOfRange,
  kDimensionMismatch,
  kTileTooLarge,
  kTimeout,
  kInvalidInput,
  kParse,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kCapacityExceeded: return "capacity-exceeded";
    case ErrorCode::kCycleDetected: return "cycle-detected";
    case ErrorCode::kEmptyDescriptor: return "empty-descriptor";
    case ErrorCode::kUnplacedElement: return "unplaced-element";
    case ErrorCode::kAddressOutOfRange: return "address-out-of-range";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kTileTooLarge: return "tile-too-large";
    case ErrorCode::kTimeout: return "timeout";
    case ErrorCode::kInvalidInput: return "invalid-input";
    case ErrorCode::kParse: return "parse-error";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace nexus
