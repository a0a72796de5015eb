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

#ifndef DQSEL_EVALHARNESS_H_
#define DQSEL_EVALHARNESS_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dqsel/corpus.h"
#include "dqsel/embeddings.h"
#include "dqsel/linmodels.h"

namespace dqsel {

// Id lookup over several embedding matrices of one dimension.
class FeatureIndex {
 public:
  // Throws DimMismatch. The matrix must outlive the index.
  void Add(const EmbeddingMatrix& m);
  std::optional<std::span<const float>> Find(std::string_view id) const;
  std::size_t dim() const { return dim_; }

  // Throws CoverageGap naming the first missing id.
  FeatureMatrix Features(const Dataset& d) const;

 private:
  std::vector<const EmbeddingMatrix*> matrices_;
  std::size_t dim_ = 0;
};

struct NamedDataset {
  std::string name;
  Dataset data;
};

struct EvalRow {
  std::string train_name;
  std::size_t train_size = 0;
  std::string probe;  // "logreg" or "svm"
  double iid_accuracy = 0.0;
  std::vector<std::pair<std::string, double>> ood;  // in given order

  bool operator==(const EvalRow&) const = default;
};

struct EvalReport {
  std::vector<EvalRow> rows;

  // Throws kInvalidConfig when the row's eval names differ from earlier rows.
  void AddRow(EvalRow row);
  std::vector<std::string> EvalNames() const;

  std::string ToJson() const;
  static EvalReport FromJson(std::string_view json);

  bool operator==(const EvalReport&) const = default;
};

inline constexpr std::string_view kProbeBanner =
    "linear-probe accuracies; not comparable to fine-tuned transformer results";

// Trains logistic regression and SVM on train and reports the probe with the
// higher dev accuracy (ties to logistic regression) on dev and every OOD set.
// Throws EmptyEvalSet, CoverageGap or LabelMismatch.
EvalRow Evaluate(std::string train_name, const Dataset& train, const Dataset& dev,
                 std::span<const NamedDataset> ood, const FeatureIndex& features,
                 const TrainConfig& probe, std::size_t threads = 0);

enum class TableFormat { kText, kMarkdown, kJson };

std::optional<TableFormat> ParseTableFormat(std::string_view name);

// Columns: Size, IID, then the eval sets in order. An eval name "group/sub"
// is shown under a group heading in text form and as "group sub" in
// markdown. Sizes of at least 100000 that are multiples of 1000 print as
// "<n>k"; accuracies print as percentages with at most two decimals.
std::string RenderTable(const EvalReport& r, TableFormat format);

std::string FormatSize(std::size_t size);
std::string FormatPercent(double accuracy);

}  // namespace dqsel

#endif  // DQSEL_EVALHARNESS_H_
