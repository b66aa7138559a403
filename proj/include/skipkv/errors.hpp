// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace skipkv {

enum class ErrorCode {
  kIo,
  kMissingBlob,
  kShapeMismatch,
  kUnsupportedVersion,
  kMalformedInput,
  kInvalidArgument,
  kConfig,
  kSchema,
  kInvariant,
};

const char* to_string(ErrorCode code);

/// Every failure surfaced by the library carries a code so callers (notably the
/// CLI) can map it onto an exit status without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) {
    fail(code, what);
  }
}

}  // namespace skipkv
