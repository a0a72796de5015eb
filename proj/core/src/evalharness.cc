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

#include "dqsel/evalharness.h"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "dqsel/error.h"
#include "json_util.h"
#include "parallel.h"

namespace dqsel {

using internal::Json;

void FeatureIndex::Add(const EmbeddingMatrix& m) {
  if (!matrices_.empty() && m.dim() != dim_) {
    throw Error(ErrorCode::kDimMismatch, "embedding files have different dims");
  }
  dim_ = m.dim();
  matrices_.push_back(&m);
}

std::optional<std::span<const float>> FeatureIndex::Find(std::string_view id) const {
  for (const auto* m : matrices_) {
    if (auto row = m->Find(id)) return m->Row(*row);
  }
  return std::nullopt;
}

FeatureMatrix FeatureIndex::Features(const Dataset& d) const {
  FeatureMatrix x(d.size(), dim_);
  for (std::size_t i = 0; i < d.size(); ++i) {
    auto row = Find(d[i].id);
    if (!row) throw Error(ErrorCode::kCoverageGap, "no features for " + d[i].id);
    std::copy(row->begin(), row->end(), x.Row(i).begin());
  }
  return x;
}

void EvalReport::AddRow(EvalRow row) {
  if (!rows.empty()) {
    const auto& first = rows.front().ood;
    bool same = first.size() == row.ood.size();
    for (std::size_t i = 0; same && i < first.size(); ++i) {
      same = first[i].first == row.ood[i].first;
    }
    if (!same) throw Error(ErrorCode::kInvalidConfig, "rows must share eval sets");
  }
  rows.push_back(std::move(row));
}

std::vector<std::string> EvalReport::EvalNames() const {
  std::vector<std::string> names;
  if (!rows.empty()) {
    for (const auto& [name, acc] : rows.front().ood) names.push_back(name);
  }
  return names;
}

std::string EvalReport::ToJson() const {
  Json j;
  j["banner"] = kProbeBanner;
  Json out = Json::array();
  for (const auto& r : rows) {
    Json row;
    row["train_name"] = r.train_name;
    row["train_size"] = r.train_size;
    row["probe"] = r.probe;
    row["iid_accuracy"] = r.iid_accuracy;
    Json ood = Json::object();
    for (const auto& [name, acc] : r.ood) ood[name] = acc;
    row["ood"] = std::move(ood);
    out.push_back(std::move(row));
  }
  j["rows"] = std::move(out);
  return j.dump(2);
}

EvalReport EvalReport::FromJson(std::string_view json) {
  EvalReport report;
  try {
    Json j = Json::parse(json);
    for (const auto& row : j.at("rows")) {
      EvalRow r;
      r.train_name = row.at("train_name").get<std::string>();
      r.train_size = row.at("train_size").get<std::size_t>();
      r.probe = row.at("probe").get<std::string>();
      r.iid_accuracy = row.at("iid_accuracy").get<double>();
      for (const auto& [name, acc] : row.at("ood").items()) {
        r.ood.emplace_back(name, acc.get<double>());
      }
      report.AddRow(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("bad eval report: ") + e.what());
  }
  return report;
}

namespace {

std::vector<int> LabelsFor(const Dataset& d, const std::vector<std::string>& order,
                           std::string_view name) {
  std::vector<int> y;
  y.reserve(d.size());
  for (const auto& s : d.samples()) {
    auto it = std::find(order.begin(), order.end(), s.label);
    if (it == order.end()) {
      throw Error(ErrorCode::kLabelMismatch,
                  "label '" + s.label + "' in " + std::string(name) + " unknown to train");
    }
    y.push_back(static_cast<int>(it - order.begin()));
  }
  return y;
}

}  // namespace

EvalRow Evaluate(std::string train_name, const Dataset& train, const Dataset& dev,
                 std::span<const NamedDataset> ood, const FeatureIndex& features,
                 const TrainConfig& probe, std::size_t threads) {
  if (train.empty()) throw Error(ErrorCode::kEmptyDataset, "train set is empty");
  if (dev.empty()) throw Error(ErrorCode::kEmptyEvalSet, "dev set is empty");
  for (const auto& e : ood) {
    if (e.data.empty()) throw Error(ErrorCode::kEmptyEvalSet, "eval set " + e.name + " is empty");
  }
  const std::vector<std::string>& order = train.schema().labels;
  std::vector<int> y_train = LabelsFor(train, order, "train");
  std::vector<int> y_dev = LabelsFor(dev, order, "dev");
  std::vector<std::vector<int>> y_ood;
  for (const auto& e : ood) y_ood.push_back(LabelsFor(e.data, order, e.name));

  FeatureMatrix x_train = features.Features(train);
  FeatureMatrix x_dev = features.Features(dev);
  std::vector<FeatureMatrix> x_ood;
  for (const auto& e : ood) x_ood.push_back(features.Features(e.data));

  LinearModel lr = TrainLogReg(x_train, y_train, order, probe);
  LinearModel svm = TrainSvm(x_train, y_train, order, probe);
  double lr_dev = Accuracy(Predict(lr, x_dev), y_dev);
  double svm_dev = Accuracy(Predict(svm, x_dev), y_dev);
  bool use_svm = svm_dev > lr_dev;
  const LinearModel& best = use_svm ? svm : lr;

  EvalRow row;
  row.train_name = std::move(train_name);
  row.train_size = train.size();
  row.probe = std::string(ModelKindName(best.kind));
  row.iid_accuracy = use_svm ? svm_dev : lr_dev;
  std::vector<double> acc(ood.size());
  internal::ParallelFor(ood.size(), threads, [&](std::size_t i) {
    acc[i] = Accuracy(Predict(best, x_ood[i]), y_ood[i]);
  });
  for (std::size_t i = 0; i < ood.size(); ++i) row.ood.emplace_back(ood[i].name, acc[i]);
  return row;
}

std::optional<TableFormat> ParseTableFormat(std::string_view name) {
  if (name == "text") return TableFormat::kText;
  if (name == "markdown") return TableFormat::kMarkdown;
  if (name == "json") return TableFormat::kJson;
  return std::nullopt;
}

std::string FormatSize(std::size_t size) {
  if (size >= 100000 && size % 1000 == 0) return std::to_string(size / 1000) + "k";
  return std::to_string(size);
}

std::string FormatPercent(double accuracy) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", std::round(accuracy * 10000.0) / 100.0);
  std::string s = buf;
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

namespace {

std::pair<std::string, std::string> SplitName(const std::string& name) {
  auto slash = name.find('/');
  if (slash == std::string::npos) return {"", name};
  return {name.substr(0, slash), name.substr(slash + 1)};
}

std::string Pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string RenderText(const EvalReport& r) {
  std::vector<std::string> names = r.EvalNames();
  std::vector<std::string> groups{"", ""};
  std::vector<std::string> heads{"Size", "IID"};
  for (const auto& n : names) {
    auto [g, sub] = SplitName(n);
    groups.push_back(g);
    heads.push_back(sub);
  }
  std::vector<std::vector<std::string>> body;
  for (const auto& row : r.rows) {
    std::vector<std::string> cells{FormatSize(row.train_size), FormatPercent(row.iid_accuracy)};
    for (const auto& [name, acc] : row.ood) cells.push_back(FormatPercent(acc));
    body.push_back(std::move(cells));
  }
  std::vector<std::size_t> width(heads.size());
  for (std::size_t c = 0; c < heads.size(); ++c) {
    width[c] = heads[c].size();
    for (const auto& cells : body) width[c] = std::max(width[c], cells[c].size());
  }
  // Group labels span consecutive columns that share them.
  std::string group_line;
  bool any_group = false;
  for (std::size_t c = 0; c < heads.size();) {
    std::size_t end = c + 1;
    while (end < heads.size() && !groups[c].empty() && groups[end] == groups[c]) ++end;
    std::size_t span = 0;
    for (std::size_t k = c; k < end; ++k) span += width[k] + 2;
    group_line += Pad(groups[c], span);
    any_group = any_group || !groups[c].empty();
    c = end;
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t c = 0; c < cells.size(); ++c) out += Pad(cells[c], width[c] + 2);
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + "\n";
  };
  std::string out = "# " + std::string(kProbeBanner) + "\n";
  if (any_group) {
    while (!group_line.empty() && group_line.back() == ' ') group_line.pop_back();
    out += group_line + "\n";
  }
  out += line(heads);
  for (const auto& cells : body) out += line(cells);
  return out;
}

std::string RenderMarkdown(const EvalReport& r) {
  std::string out = "> " + std::string(kProbeBanner) + "\n\n| Size | IID |";
  std::string rule = "|---:|---:|";
  for (const auto& n : r.EvalNames()) {
    auto [g, sub] = SplitName(n);
    out += " " + (g.empty() ? sub : g + " " + sub) + " |";
    rule += "---:|";
  }
  out += "\n" + rule + "\n";
  for (const auto& row : r.rows) {
    out += "| " + FormatSize(row.train_size) + " | " + FormatPercent(row.iid_accuracy) + " |";
    for (const auto& [name, acc] : row.ood) out += " " + FormatPercent(acc) + " |";
    out += "\n";
  }
  return out;
}

}  // namespace

std::string RenderTable(const EvalReport& r, TableFormat format) {
  switch (format) {
    case TableFormat::kText: return RenderText(r);
    case TableFormat::kMarkdown: return RenderMarkdown(r);
    case TableFormat::kJson: return r.ToJson() + "\n";
  }
  return {};
}

}  // namespace dqsel
