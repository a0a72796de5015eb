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

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "dqsel/dqi.h"
#include "dqsel/error.h"
#include "json_util.h"

namespace dqsel {

namespace internal {
std::string_view BundledDefaultDqiConfig();
}  // namespace internal

using internal::Json;

namespace {

std::string_view SourceName(SimilaritySource s) {
  switch (s) {
    case SimilaritySource::kAuto: return "auto";
    case SimilaritySource::kEmbedding: return "embedding";
    case SimilaritySource::kBagOfWords: return "bow";
  }
  return "auto";
}

SimilaritySource ParseSource(const std::string& s) {
  if (s == "auto") return SimilaritySource::kAuto;
  if (s == "embedding") return SimilaritySource::kEmbedding;
  if (s == "bow") return SimilaritySource::kBagOfWords;
  throw Error(ErrorCode::kInvalidConfig, "c5_source must be auto|embedding|bow");
}

}  // namespace

std::string_view ComponentName(Component c) {
  static constexpr std::array<std::string_view, kNumComponents> kNames = {
      "C1", "C2", "C3", "C4", "C5", "C6", "C7"};
  return kNames[static_cast<std::size_t>(c)];
}

std::optional<Component> ParseComponent(std::string_view name) {
  for (Component c : kAllComponents) {
    if (ComponentName(c) == name) return c;
  }
  return std::nullopt;
}

std::string_view ColorName(Color c) {
  switch (c) {
    case Color::kRed: return "red";
    case Color::kYellow: return "yellow";
    case Color::kGreen: return "green";
  }
  return "yellow";
}

void DqiConfig::Validate() const {
  bool any = false;
  for (double w : weights) {
    if (!(w >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "weights must be >= 0");
    any = any || w > 0.0;
  }
  if (!any) throw Error(ErrorCode::kInvalidConfig, "weights are all zero");
  if (sort_components.empty()) {
    throw Error(ErrorCode::kInvalidConfig, "sort_components is empty");
  }
  if (standalone_scores &&
      std::all_of(sort_components.begin(), sort_components.end(), [](Component c) {
        return c == Component::kC2 || c == Component::kC4;
      })) {
    throw Error(ErrorCode::kInvalidConfig, "standalone_scores needs a component other than C2 or C4");
  }
  if (!(0.0 <= red_below && red_below < green_at_or_above && green_at_or_above <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig,
                "thresholds need 0 <= red_below < green_at_or_above <= 1");
  }
  if (mi_bins < 2) throw Error(ErrorCode::kInvalidConfig, "mi_bins must be >= 2");
  if (ngram_max < 1) throw Error(ErrorCode::kInvalidConfig, "ngram_max must be >= 1");
  if (!(pmi_alpha >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "pmi_alpha must be >= 0");
}

DqiConfig ParseDqiConfig(std::string_view json) {
  Json j;
  try {
    j = Json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("dqi config: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kInvalidConfig, "dqi config is not an object");
  static const std::set<std::string> kKeys = {
      "weights",   "sort_components", "ngram_max",  "pmi_alpha",
      "mi_bins",   "thresholds",      "c5_source",  "standalone_scores"};
  for (const auto& item : j.items()) {
    if (!kKeys.contains(item.key())) {
      throw Error(ErrorCode::kInvalidConfig, "unknown dqi config key " + item.key());
    }
  }
  DqiConfig cfg;
  if (auto w = j.find("weights"); w != j.end()) {
    if (!w->is_object()) throw Error(ErrorCode::kInvalidConfig, "weights must be an object");
    for (const auto& item : w->items()) {
      auto c = ParseComponent(item.key());
      if (!c || !item.value().is_number()) {
        throw Error(ErrorCode::kInvalidConfig, "bad weight entry " + item.key());
      }
      cfg.weights[static_cast<std::size_t>(*c)] = item.value().get<double>();
    }
  }
  if (auto s = j.find("sort_components"); s != j.end()) {
    cfg.sort_components.clear();
    for (const auto& name : internal::GetOr<std::vector<std::string>>(
             j, "sort_components", {})) {
      auto c = ParseComponent(name);
      if (!c) throw Error(ErrorCode::kInvalidConfig, "unknown component " + name);
      cfg.sort_components.push_back(*c);
    }
  }
  cfg.ngram_max = internal::GetOr<int>(j, "ngram_max", cfg.ngram_max);
  cfg.pmi_alpha = internal::GetOr<double>(j, "pmi_alpha", cfg.pmi_alpha);
  cfg.mi_bins = internal::GetOr<int>(j, "mi_bins", cfg.mi_bins);
  if (auto t = j.find("thresholds"); t != j.end()) {
    cfg.red_below = internal::GetOr<double>(*t, "red_below", cfg.red_below);
    cfg.green_at_or_above =
        internal::GetOr<double>(*t, "green_at_or_above", cfg.green_at_or_above);
  }
  cfg.c5_source = ParseSource(internal::GetOr<std::string>(j, "c5_source", "auto"));
  cfg.standalone_scores =
      internal::GetOr<bool>(j, "standalone_scores", cfg.standalone_scores);
  cfg.Validate();
  return cfg;
}

DqiConfig LoadDqiConfig(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return ParseDqiConfig(buffer.str());
}

std::string DqiConfigToJson(const DqiConfig& cfg) {
  Json j;
  Json weights = Json::object();
  for (Component c : kAllComponents) {
    weights[std::string(ComponentName(c))] = cfg.weights[static_cast<std::size_t>(c)];
  }
  j["weights"] = std::move(weights);
  Json sort = Json::array();
  for (Component c : cfg.sort_components) sort.push_back(ComponentName(c));
  j["sort_components"] = std::move(sort);
  j["ngram_max"] = cfg.ngram_max;
  j["pmi_alpha"] = cfg.pmi_alpha;
  j["mi_bins"] = cfg.mi_bins;
  j["thresholds"] = {{"red_below", cfg.red_below},
                     {"green_at_or_above", cfg.green_at_or_above}};
  j["c5_source"] = SourceName(cfg.c5_source);
  j["standalone_scores"] = cfg.standalone_scores;
  return j.dump(2);
}

std::string_view DefaultDqiConfigText() { return internal::BundledDefaultDqiConfig(); }

}  // namespace dqsel
