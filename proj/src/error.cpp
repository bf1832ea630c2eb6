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

#include "compose/error.hpp"

namespace compose {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kZeroRow: return "ZeroRow";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kTruncatedFile: return "TruncatedFile";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kEmptyAfterTokenization: return "EmptyAfterTokenization";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kEmptyIndex: return "EmptyIndex";
    case ErrorCode::kBadPatchSize: return "BadPatchSize";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonLearnableKind: return "NonLearnableKind";
    case ErrorCode::kDataEmpty: return "DataEmpty";
    case ErrorCode::kLexiconExhausted: return "LexiconExhausted";
    case ErrorCode::kUnsupportedPattern: return "UnsupportedPattern";
    case ErrorCode::kCancellation: return "Cancellation";
    case ErrorCode::kNoJudgedQueries: return "NoJudgedQueries";
    case ErrorCode::kMissingEmbedding: return "MissingEmbedding";
    case ErrorCode::kMissingParaphrases: return "MissingParaphrases";
  }
  return "Unknown";
}

namespace {

std::string format_message(ErrorCode code, const std::string& message,
                           std::optional<std::size_t> line) {
  std::string out(to_string(code));
  if (line) out += " (line " + std::to_string(*line) + ")";
  out += ": ";
  out += message;
  return out;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message,
             std::optional<std::size_t> line)
    : std::runtime_error(format_message(code, message, line)),
      code_(code),
      message_(message),
      line_(line) {}

}  // namespace compose
