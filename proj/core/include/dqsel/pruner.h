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

#ifndef DQSEL_PRUNER_H_
#define DQSEL_PRUNER_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dqsel/corpus.h"
#include "dqsel/dqi.h"
#include "dqsel/embeddings.h"
#include "dqsel/linmodels.h"

namespace dqsel {

enum class CoarseUnits { kSamples, kPercent };

struct PruneConfig {
  std::size_t b = 1000;  // coarse growth step
  double epsilon = 0.002;
  int m = 16;
  double t = 0.5;  // member train share of |S|
  double tau = 0.75;
  std::optional<std::size_t> n;  // target size; default 10% of the start set
  std::size_t k = 500;
  std::uint64_t seed = 0;
  DqiConfig dqi;
  TrainConfig probe;
  bool coarse_enabled = true;
  CoarseUnits coarse_units = CoarseUnits::kSamples;
  std::size_t threads = 0;

  // Throws kInvalidConfig.
  void Validate() const;
};

// {"b", "epsilon", "m", "t", "tau", "n", "k", "seed", "threads",
//  "coarse": {"enabled", "units"}, "probe": {...}, "dqi": {...}}; every key is
// optional and unknown keys are rejected.
PruneConfig ParsePruneConfig(std::string_view json);
PruneConfig LoadPruneConfig(const std::filesystem::path& path);
std::string PruneConfigToJson(const PruneConfig& cfg);

// Seeds of coarse step `step` and outer iteration `iteration`; the ensemble
// of an iteration derives its member seeds from the latter.
std::uint64_t CoarseStepSeed(std::uint64_t seed, std::size_t step);
std::uint64_t PruneIterationSeed(std::uint64_t seed, std::size_t iteration);

struct CoarseStep {
  std::size_t a = 0;     // in configured units
  std::size_t size = 0;  // samples drawn
  double accuracy = 0.0;
  bool improved = false;
};

struct CoarseResult {
  std::vector<std::size_t> selected;  // ascending positions
  std::vector<CoarseStep> steps;
};

// Accuracy of a probe trained and tested on the given positions.
using CoarseProbe =
    std::function<double(std::span<const std::size_t> subset, std::uint64_t seed)>;

// Grows a random subset by b until accuracy stops improving by more than
// epsilon; the first step always counts as an improvement. Returns the last
// improving subset.
CoarseResult CoarseSelect(std::size_t population, const PruneConfig& cfg,
                          const CoarseProbe& probe);

// Mean accuracy of logistic regression and SVM trained on a seeded half of
// `subset` and tested on the other half.
double SplitHalfAccuracy(const Dataset& d, const FeatureMatrix& features,
                         std::span<const std::size_t> subset,
                         const TrainConfig& probe, std::uint64_t seed);

struct PruneIteration {
  std::size_t iteration = 0;
  std::size_t size_before = 0;
  std::size_t shortlist_size = 0;
  std::vector<std::string> deleted_ids;  // deletion order
  std::vector<double> deleted_p;
  std::vector<double> deleted_composite;
  double min_p = 0.0;
  double max_p = 0.0;
  double composite_cutoff = 0.0;  // largest composite among deleted
  std::optional<double> retained_min_composite;
  std::string early_stop;  // empty when the loop continued

  bool operator==(const PruneIteration&) const = default;
};

struct PruneTrace {
  bool coarse_enabled = false;
  std::vector<CoarseStep> coarse_steps;
  std::size_t input_size = 0;
  std::size_t burned_removed = 0;
  std::size_t start_size = 0;  // |S0|
  std::size_t target = 0;
  std::vector<PruneIteration> iterations;
  std::string stop_reason;
  std::size_t final_size = 0;

  // One "coarse" record, one "iteration" record per outer iteration and a
  // closing "stop" record.
  std::string ToJsonl() const;
  static PruneTrace FromJsonl(std::string_view text);
};

struct PruneResult {
  Dataset kept;
  PruneTrace trace;
};

// Removes burned ids, optionally runs the coarse selection, then repeats:
// ensemble predictability, shortlist P > tau, delete the min(k, |shortlist|)
// lowest composite DQI. Throws EmbeddingCoverageGap or TargetTooLarge.
// `probe` replaces the default coarse probe; its positions index d minus
// burned ids.
PruneResult Prune(const Dataset& d, const EmbeddingMatrix& emb,
                  std::span<const std::string> burned, const PruneConfig& cfg,
                  const CoarseProbe* probe = nullptr);

}  // namespace dqsel

#endif  // DQSEL_PRUNER_H_
