// Copyright 2026 The Triage Loop Authors. All Rights Reserved.
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
// =============================================================================

#ifndef TRIAGE_ERROR_HPP_
#define TRIAGE_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace triage {

enum class ErrorCode {
  kEmptyUtterance,
  kAlternationViolation,
  kDialogueTerminated,
  kPrecondition,
  kTransportError,
  kBackendRefusal,
  kScriptMiss,
  kDuplicateKey,
  kEmptySequence,
  kInvalidLogProb,
  kMissingBinding,
  kLastTurnNotPatient,
  kLastTurnNotDoctor,
  kScoreParseFailure,
  kExtractParseFailure,
  kEmptyInput,
  kEmptyCorpus,
  kFileUnreadable,
  kSchemaError,
  kInsufficientRecords,
  kEmptyHistory,
  kEmptyIntersection,
  kInvalidConfig,
};

inline std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyUtterance: return "EmptyUtterance";
    case ErrorCode::kAlternationViolation: return "AlternationViolation";
    case ErrorCode::kDialogueTerminated: return "DialogueTerminated";
    case ErrorCode::kPrecondition: return "PreconditionViolation";
    case ErrorCode::kTransportError: return "TransportError";
    case ErrorCode::kBackendRefusal: return "BackendRefusal";
    case ErrorCode::kScriptMiss: return "ScriptMiss";
    case ErrorCode::kDuplicateKey: return "DuplicateKey";
    case ErrorCode::kEmptySequence: return "EmptySequence";
    case ErrorCode::kInvalidLogProb: return "InvalidLogProb";
    case ErrorCode::kMissingBinding: return "MissingBinding";
    case ErrorCode::kLastTurnNotPatient: return "LastTurnNotPatient";
    case ErrorCode::kLastTurnNotDoctor: return "LastTurnNotDoctor";
    case ErrorCode::kScoreParseFailure: return "ScoreParseFailure";
    case ErrorCode::kExtractParseFailure: return "ExtractParseFailure";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kEmptyCorpus: return "EmptyCorpus";
    case ErrorCode::kFileUnreadable: return "FileUnreadable";
    case ErrorCode::kSchemaError: return "SchemaError";
    case ErrorCode::kInsufficientRecords: return "InsufficientRecords";
    case ErrorCode::kEmptyHistory: return "EmptyHistory";
    case ErrorCode::kEmptyIntersection: return "EmptyIntersection";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

/// Every failure raised by the library. The code is stable and matched on by
/// callers; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(error_name(code)) +
                           (detail.empty() ? "" : ": " + detail)),
        code_(code),
        detail_(detail) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace triage

#endif  // TRIAGE_ERROR_HPP_
