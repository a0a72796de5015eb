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

#ifndef DQSEL_ERROR_H_
#define DQSEL_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace dqsel {

// Every failure the library reports carries one of these codes. The CLI maps
// them onto exit statuses and the HTTP layer onto response codes.
enum class ErrorCode {
  kMalformedRecord,
  kDuplicateId,
  kUnknownLabel,
  kDatasetTooSmall,
  kIoFailure,
  kInvalidOrder,
  kEmptyDataset,
  kMissingEmbeddings,
  kUnknownId,
  kNoDefinedComponents,
  kSchemaMismatch,
  kEmptyState,
  kInvariantViolation,
  kBadMagic,
  kVersionMismatch,
  kDimMismatch,
  kTruncatedFile,
  kKOutOfRange,
  kSingleClassInput,
  kTrainTooLarge,
  kCoarseDisabled,
  kEmbeddingCoverageGap,
  kTargetTooLarge,
  kCoverageGap,
  kLabelMismatch,
  kEmptyEvalSet,
  kUnknownDraft,
  kUnknownSample,
  kWrongState,
  kMissingFeedback,
  kInvalidConfig,
};

std::string_view ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// True for codes that describe bad configuration rather than bad data.
bool IsConfigError(ErrorCode code);

}  // namespace dqsel

#endif  // DQSEL_ERROR_H_
