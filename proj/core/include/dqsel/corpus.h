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

#ifndef DQSEL_CORPUS_H_
#define DQSEL_CORPUS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dqsel {

// Field names are ordered (the order text fields are concatenated in); label
// names are an opaque vocabulary whose listed order is only used as a stable
// index for classifiers.
struct TaskSchema {
  std::string name;
  std::vector<std::string> field_names;
  std::vector<std::string> labels;

  // Throws Error(kInvalidConfig) when a list is empty or has repeats.
  void Validate() const;
  bool HasLabel(std::string_view label) const;
  std::optional<std::size_t> LabelIndex(std::string_view label) const;

  bool operator==(const TaskSchema&) const = default;
};

struct Sample {
  std::string id;
  std::map<std::string, std::string> fields;
  std::string label;
  std::optional<std::string> split;

  bool operator==(const Sample&) const = default;
};

// Checks a sample against a schema: non-empty id, exactly the schema's
// fields, known label. Throws Error(kSchemaMismatch).
void CheckSampleAgainstSchema(const Sample& sample, const TaskSchema& schema);

// An ordered, id-unique collection of samples under one schema. Immutable
// once built; derived datasets are new values.
class Dataset {
 public:
  Dataset() = default;
  // Validates every sample and id uniqueness. Throws DuplicateId,
  // UnknownLabel or SchemaMismatch.
  Dataset(TaskSchema schema, std::vector<Sample> samples);

  const TaskSchema& schema() const { return schema_; }
  std::span<const Sample> samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }

  std::optional<std::size_t> Find(std::string_view id) const;

  // Samples at the given positions, in the given order.
  Dataset Subset(std::span<const std::size_t> indices) const;
  Dataset Without(std::size_t index) const;
  Dataset With(Sample sample) const;

  bool operator==(const Dataset& other) const {
    return schema_ == other.schema_ && samples_ == other.samples_;
  }

 private:
  struct Unchecked {};
  Dataset(Unchecked, TaskSchema schema, std::vector<Sample> samples);
  void BuildIndex();

  TaskSchema schema_;
  std::vector<Sample> samples_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Line-delimited JSON: {"id", "fields": {...}, "label", "split"?}.
// Errors: MalformedRecord (1-based line number in the message and in
// Error::what()), DuplicateId, UnknownLabel, IoFailure.
Dataset LoadDataset(const std::filesystem::path& path, const TaskSchema& schema);
Dataset ParseDataset(std::string_view jsonl, const TaskSchema& schema);

void WriteDataset(const Dataset& d, const std::filesystem::path& path);
std::string SerializeDataset(const Dataset& d);

// One JSONL record for `sample`, fields emitted in schema order, no newline.
std::string SampleToJsonLine(const Sample& sample, const TaskSchema& schema);

// Builds a schema from a JSONL file: field names from the first record in
// key order, labels in first-seen order.
TaskSchema InferSchema(const std::filesystem::path& path, std::string name = "");

// Schema document: {"name", "fields": [...], "labels": [...]}.
TaskSchema LoadSchema(const std::filesystem::path& path);

// Disjoint, exhaustive partition. part_a has floor(fraction * |d|) samples;
// both parts keep the original relative order. Deterministic in
// (d, fraction, seed).
std::pair<Dataset, Dataset> SplitDataset(const Dataset& d, double fraction,
                                         std::uint64_t seed);

// Concatenation of the sample's field texts in schema order, space-joined.
std::string JoinedText(const Sample& sample, const TaskSchema& schema);

}  // namespace dqsel

#endif  // DQSEL_CORPUS_H_
