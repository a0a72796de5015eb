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

#include "dqsel/corpus.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "dqsel/error.h"
#include "dqsel/rng.h"
#include "json_util.h"

namespace dqsel {

using internal::Json;

namespace {

template <typename Container>
bool HasDuplicates(const Container& values) {
  std::set<std::string> seen;
  for (const auto& v : values) {
    if (!seen.insert(v).second) return true;
  }
  return false;
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string LineWhere(std::size_t line) {
  return "line " + std::to_string(line);
}

}  // namespace

namespace internal {

Json SampleToJson(const Sample& sample, const TaskSchema& schema) {
  Json j;
  j["id"] = sample.id;
  Json fields = Json::object();
  for (const auto& name : schema.field_names) {
    auto it = sample.fields.find(name);
    fields[name] = it == sample.fields.end() ? std::string() : it->second;
  }
  j["fields"] = std::move(fields);
  j["label"] = sample.label;
  if (sample.split) j["split"] = *sample.split;
  return j;
}

Sample SampleFromJson(const Json& j, const TaskSchema& schema,
                      const std::string& where) {
  auto malformed = [&](const std::string& what) {
    return Error(ErrorCode::kMalformedRecord, where + ": " + what);
  };
  if (!j.is_object()) throw malformed("record is not an object");
  Sample s;
  auto id = j.find("id");
  if (id == j.end() || !id->is_string() || id->get<std::string>().empty()) {
    throw malformed("missing or empty \"id\"");
  }
  s.id = id->get<std::string>();
  auto fields = j.find("fields");
  if (fields == j.end() || !fields->is_object()) {
    throw malformed("missing \"fields\" object");
  }
  for (const auto& name : schema.field_names) {
    auto f = fields->find(name);
    if (f == fields->end() || !f->is_string()) {
      throw malformed("missing text field \"" + name + "\"");
    }
    s.fields.emplace(name, f->get<std::string>());
  }
  if (fields->size() != schema.field_names.size()) {
    throw malformed("fields not in schema");
  }
  auto label = j.find("label");
  if (label == j.end() || !label->is_string()) {
    throw malformed("missing \"label\"");
  }
  s.label = label->get<std::string>();
  auto split = j.find("split");
  if (split != j.end() && !split->is_null()) {
    if (!split->is_string()) throw malformed("\"split\" is not a string");
    s.split = split->get<std::string>();
  }
  return s;
}

}  // namespace internal

void TaskSchema::Validate() const {
  if (field_names.empty()) {
    throw Error(ErrorCode::kInvalidConfig, "schema has no fields");
  }
  if (labels.empty()) {
    throw Error(ErrorCode::kInvalidConfig, "schema has no labels");
  }
  if (HasDuplicates(field_names) || HasDuplicates(labels)) {
    throw Error(ErrorCode::kInvalidConfig, "schema names must be unique");
  }
}

bool TaskSchema::HasLabel(std::string_view label) const {
  return LabelIndex(label).has_value();
}

std::optional<std::size_t> TaskSchema::LabelIndex(std::string_view label) const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) return i;
  }
  return std::nullopt;
}

void CheckSampleAgainstSchema(const Sample& sample, const TaskSchema& schema) {
  if (sample.id.empty()) {
    throw Error(ErrorCode::kSchemaMismatch, "sample id is empty");
  }
  if (sample.fields.size() != schema.field_names.size()) {
    throw Error(ErrorCode::kSchemaMismatch,
                "sample " + sample.id + " does not have exactly the schema fields");
  }
  for (const auto& name : schema.field_names) {
    if (!sample.fields.contains(name)) {
      throw Error(ErrorCode::kSchemaMismatch,
                  "sample " + sample.id + " is missing field " + name);
    }
  }
  if (!schema.HasLabel(sample.label)) {
    throw Error(ErrorCode::kSchemaMismatch,
                "sample " + sample.id + " has unknown label " + sample.label);
  }
}

Dataset::Dataset(TaskSchema schema, std::vector<Sample> samples)
    : schema_(std::move(schema)), samples_(std::move(samples)) {
  schema_.Validate();
  for (const auto& s : samples_) {
    if (!schema_.HasLabel(s.label)) {
      throw Error(ErrorCode::kUnknownLabel, s.id + " has label " + s.label);
    }
    CheckSampleAgainstSchema(s, schema_);
  }
  BuildIndex();
}

Dataset::Dataset(Unchecked, TaskSchema schema, std::vector<Sample> samples)
    : schema_(std::move(schema)), samples_(std::move(samples)) {
  BuildIndex();
}

void Dataset::BuildIndex() {
  index_.clear();
  index_.reserve(samples_.size());
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (!index_.emplace(samples_[i].id, i).second) {
      throw Error(ErrorCode::kDuplicateId, samples_[i].id);
    }
  }
}

std::optional<std::size_t> Dataset::Find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Dataset Dataset::Subset(std::span<const std::size_t> indices) const {
  std::vector<Sample> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(samples_.at(i));
  return Dataset(Unchecked{}, schema_, std::move(out));
}

Dataset Dataset::Without(std::size_t index) const {
  std::vector<Sample> out;
  out.reserve(samples_.size());
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (i != index) out.push_back(samples_[i]);
  }
  return Dataset(Unchecked{}, schema_, std::move(out));
}

Dataset Dataset::With(Sample sample) const {
  CheckSampleAgainstSchema(sample, schema_);
  std::vector<Sample> out = samples_;
  out.push_back(std::move(sample));
  return Dataset(Unchecked{}, schema_, std::move(out));
}

Dataset ParseDataset(std::string_view jsonl, const TaskSchema& schema) {
  schema.Validate();
  std::vector<Sample> samples;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    std::size_t end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    std::string_view line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kMalformedRecord,
                  LineWhere(line_no) + ": " + e.what());
    }
    Sample s = internal::SampleFromJson(j, schema, LineWhere(line_no));
    if (!seen.insert(s.id).second) throw Error(ErrorCode::kDuplicateId, s.id);
    if (!schema.HasLabel(s.label)) {
      throw Error(ErrorCode::kUnknownLabel, s.id + " has label " + s.label);
    }
    samples.push_back(std::move(s));
  }
  return Dataset(schema, std::move(samples));
}

Dataset LoadDataset(const std::filesystem::path& path, const TaskSchema& schema) {
  return ParseDataset(ReadFile(path), schema);
}

std::string SampleToJsonLine(const Sample& sample, const TaskSchema& schema) {
  return internal::Dump(internal::SampleToJson(sample, schema));
}

std::string SerializeDataset(const Dataset& d) {
  std::string out;
  for (const auto& s : d.samples()) {
    out += SampleToJsonLine(s, d.schema());
    out += '\n';
  }
  return out;
}

void WriteDataset(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + path.string());
  out << SerializeDataset(d);
  if (!out) throw Error(ErrorCode::kIoFailure, "write failed: " + path.string());
}

TaskSchema InferSchema(const std::filesystem::path& path, std::string name) {
  std::string text = ReadFile(path);
  TaskSchema schema;
  schema.name = name.empty() ? path.stem().string() : std::move(name);
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kMalformedRecord, LineWhere(line_no) + ": " + e.what());
    }
    if (schema.field_names.empty()) {
      auto fields = j.find("fields");
      if (fields == j.end() || !fields->is_object()) {
        throw Error(ErrorCode::kMalformedRecord,
                    LineWhere(line_no) + ": missing \"fields\" object");
      }
      for (const auto& item : fields->items()) schema.field_names.push_back(item.key());
    }
    auto label = j.find("label");
    if (label == j.end() || !label->is_string()) {
      throw Error(ErrorCode::kMalformedRecord, LineWhere(line_no) + ": missing \"label\"");
    }
    std::string l = label->get<std::string>();
    if (!schema.HasLabel(l)) schema.labels.push_back(l);
  }
  if (schema.field_names.empty() || schema.labels.empty()) {
    throw Error(ErrorCode::kEmptyDataset, "cannot infer a schema from " + path.string());
  }
  return schema;
}

TaskSchema LoadSchema(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(ReadFile(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, path.string() + ": " + e.what());
  }
  TaskSchema schema;
  schema.name = internal::GetOr<std::string>(j, "name", "");
  schema.field_names = internal::GetOr<std::vector<std::string>>(j, "fields", {});
  schema.labels = internal::GetOr<std::vector<std::string>>(j, "labels", {});
  schema.Validate();
  return schema;
}

std::pair<Dataset, Dataset> SplitDataset(const Dataset& d, double fraction,
                                         std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "split fraction must be in (0,1)");
  }
  if (d.size() < 2) throw Error(ErrorCode::kDatasetTooSmall, "split needs >= 2 samples");
  // The epsilon keeps products like 0.29 * 100 from flooring to 28.
  auto size_a = static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(d.size()) + 1e-9));
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(DeriveSeed(seed, 0x5911));
  rng.Shuffle(order);
  std::vector<std::size_t> a(order.begin(), order.begin() + size_a);
  std::vector<std::size_t> b(order.begin() + size_a, order.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return {d.Subset(a), d.Subset(b)};
}

std::string JoinedText(const Sample& sample, const TaskSchema& schema) {
  std::string out;
  for (const auto& name : schema.field_names) {
    auto it = sample.fields.find(name);
    if (it == sample.fields.end()) continue;
    if (!out.empty()) out += ' ';
    out += it->second;
  }
  return out;
}

}  // namespace dqsel
