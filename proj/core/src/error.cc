// Copyright 2026 The dqsel Authors.
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

#include "dqsel/error.h"

namespace dqsel {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedRecord: return "MalformedRecord";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kUnknownLabel: return "UnknownLabel";
    case ErrorCode::kDatasetTooSmall: return "DatasetTooSmall";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kInvalidOrder: return "InvalidOrder";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kMissingEmbeddings: return "MissingEmbeddings";
    case ErrorCode::kUnknownId: return "UnknownId";
    case ErrorCode::kNoDefinedComponents: return "NoDefinedComponents";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kEmptyState: return "EmptyState";
    case ErrorCode::kInvariantViolation: return "InvariantViolation";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kTruncatedFile: return "TruncatedFile";
    case ErrorCode::kKOutOfRange: return "KOutOfRange";
    case ErrorCode::kSingleClassInput: return "SingleClassInput";
    case ErrorCode::kTrainTooLarge: return "TrainTooLarge";
    case ErrorCode::kCoarseDisabled: return "CoarseDisabled";
    case ErrorCode::kEmbeddingCoverageGap: return "EmbeddingCoverageGap";
    case ErrorCode::kTargetTooLarge: return "TargetTooLarge";
    case ErrorCode::kCoverageGap: return "CoverageGap";
    case ErrorCode::kLabelMismatch: return "LabelMismatch";
    case ErrorCode::kEmptyEvalSet: return "EmptyEvalSet";
    case ErrorCode::kUnknownDraft: return "UnknownDraft";
    case ErrorCode::kUnknownSample: return "UnknownSample";
    case ErrorCode::kWrongState: return "WrongState";
    case ErrorCode::kMissingFeedback: return "MissingFeedback";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
      code_(code) {}

bool IsConfigError(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfig:
    case ErrorCode::kCoarseDisabled:
    case ErrorCode::kTargetTooLarge:
    case ErrorCode::kTrainTooLarge:
    case ErrorCode::kInvalidOrder:
    case ErrorCode::kKOutOfRange:
      return true;
    default:
      return false;
  }
}

}  // namespace dqsel
