// Copyright 2026 The Compose-Verify Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace compose {

enum class ErrorCode {
  kInvalidArgument,
  kIoError,
  kConfigError,
  kZeroRow,
  kBadMagic,
  kDimMismatch,
  kTruncatedFile,
  kParseError,
  kEmptyAfterTokenization,
  kDuplicateId,
  kEmptyIndex,
  kBadPatchSize,
  kShapeMismatch,
  kNonLearnableKind,
  kDataEmpty,
  kLexiconExhausted,
  kUnsupportedPattern,
  kCancellation,
  kNoJudgedQueries,
  kMissingEmbedding,
  kMissingParaphrases,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library. The code is the machine-readable
// part; `line` is set for line-oriented parse failures (1-based).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> line = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> line() const noexcept { return line_; }
  // Message without the code prefix or line suffix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
  std::optional<std::size_t> line_;
};

}  // namespace compose
