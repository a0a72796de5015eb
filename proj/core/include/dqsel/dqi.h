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

#ifndef DQSEL_DQI_H_
#define DQSEL_DQI_H_

#include <array>
#include <bitset>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dqsel/corpus.h"
#include "dqsel/embeddings.h"

namespace dqsel {

// Data quality index components. Each is realized by one representative,
// testable term:
//   C1 vocabulary: harmonic mean of vocabulary richness |V|/sum(tokens) and
//      normalized length dispersion min(1, sigma/mu)
//   C2 frequency: mean normalized Shannon entropy over unigram..ngram_max,
//      coarse POS and whole-field granularities
//   C3 inter-sample overlap: mean of 1 - max Jaccard to any other sample
//   C4 intra-sample overlap: 1 - NMI(binned field-pair Jaccard; label)
//   C5 similarity: 1 - NMI(binned similarity; label), where similarity is
//      field-pair bag-of-words cosine, or nearest-neighbor embedding cosine
//      when embeddings are used
//   C6 label leakage: mean of 1 / (1 + max(0, mean pmi(f, label)))
//   C7 split leakage: mean over eval-split samples of 1 - max Jaccard to a
//      train-split sample
// All lie in [0, 1]; higher is better.
enum class Component { kC1 = 0, kC2, kC3, kC4, kC5, kC6, kC7 };
inline constexpr std::size_t kNumComponents = 7;
inline constexpr std::array<Component, kNumComponents> kAllComponents = {
    Component::kC1, Component::kC2, Component::kC3, Component::kC4,
    Component::kC5, Component::kC6, Component::kC7};

std::string_view ComponentName(Component c);
std::optional<Component> ParseComponent(std::string_view name);

enum class Color { kRed, kYellow, kGreen };
std::string_view ColorName(Color c);

enum class SimilaritySource { kAuto, kEmbedding, kBagOfWords };

struct DqiConfig {
  std::array<double, kNumComponents> weights = {1, 1, 1, 1, 1, 1, 1};
  std::vector<Component> sort_components = {Component::kC1};
  int ngram_max = 3;
  double pmi_alpha = 1.0;
  int mi_bins = 10;
  double red_below = 0.25;
  double green_at_or_above = 0.60;
  SimilaritySource c5_source = SimilaritySource::kAuto;
  // Rank by each sample's own per-sample term instead of its leave-one-out
  // contribution.
  bool standalone_scores = false;

  void Validate() const;
  bool operator==(const DqiConfig&) const = default;
};

DqiConfig ParseDqiConfig(std::string_view json);
DqiConfig LoadDqiConfig(const std::filesystem::path& path);
std::string DqiConfigToJson(const DqiConfig& cfg);
// Text of the bundled default-dqi.json.
std::string_view DefaultDqiConfigText();

// Dataset-level scores; a component that is undefined for the dataset's
// shape is nullopt, never 0.
struct DqiVector {
  std::array<std::optional<double>, kNumComponents> values;

  const std::optional<double>& operator[](Component c) const {
    return values[static_cast<std::size_t>(c)];
  }
  std::optional<double>& operator[](Component c) {
    return values[static_cast<std::size_t>(c)];
  }
  bool operator==(const DqiVector&) const = default;
};

using NamedValues = std::vector<std::pair<std::string, double>>;

// q_c(s) = term_c(D) - term_c(D \ {s}). Negative means removing s would
// improve component c.
struct ImpactVector {
  std::array<std::optional<double>, kNumComponents> values;
  // Same delta for each sub-term of a component (e.g. richness and
  // dispersion for C1).
  std::array<NamedValues, kNumComponents> terms;

  const std::optional<double>& operator[](Component c) const {
    return values[static_cast<std::size_t>(c)];
  }
  std::optional<double>& operator[](Component c) {
    return values[static_cast<std::size_t>(c)];
  }
};

// Direct evaluation of every component from scratch. emb may be null.
// Throws DatasetTooSmall for fewer than 2 samples and MissingEmbeddings when
// cfg forces embedding similarity without full coverage.
DqiVector ComponentScores(const Dataset& d, const EmbeddingMatrix* emb,
                          const DqiConfig& cfg);

// Sub-term values behind each component of ComponentScores.
std::array<NamedValues, kNumComponents> ComponentTerms(const Dataset& d,
                                                       const EmbeddingMatrix* emb,
                                                       const DqiConfig& cfg);

// Incremental leave-one-out evaluation over one immutable dataset snapshot.
// Construction precomputes aggregates in O(N^2) for the overlap components;
// each Impact() is then O(N) or better.
class DqiEngine {
 public:
  using ComponentMask = std::bitset<kNumComponents>;

  DqiEngine(const Dataset& d, const EmbeddingMatrix* emb, const DqiConfig& cfg,
            ComponentMask mask = ComponentMask().set(), std::size_t threads = 0);
  ~DqiEngine();
  DqiEngine(DqiEngine&&) noexcept;
  DqiEngine& operator=(DqiEngine&&) noexcept;

  std::size_t size() const;

  // Component values reconstructed from the aggregates.
  DqiVector Scores() const;

  // Requires size() >= 3.
  ImpactVector Impact(std::size_t index) const;

  // Impact of every sample, computed in parallel.
  std::vector<ImpactVector> AllImpacts() const;

  // Per-sample standalone terms (C3, C5 with embeddings, C6, C7 for eval
  // samples; C1 as the sample's own type/token ratio).
  ImpactVector Standalone(std::size_t index) const;

  // Inspection helpers used for recommendations.
  struct Neighbor {
    std::size_t index = 0;
    double similarity = 0.0;
  };
  std::optional<Neighbor> NearestByJaccard(std::size_t index) const;
  std::optional<Neighbor> NearestTrainByJaccard(std::size_t index) const;
  std::optional<Neighbor> NearestByEmbedding(std::size_t index) const;
  bool uses_embeddings() const;

 private:
  struct State;
  std::unique_ptr<State> state_;
};

ImpactVector SampleImpact(const Dataset& d, std::string_view id,
                          const EmbeddingMatrix* emb, const DqiConfig& cfg);

// Weighted mean of the impacts in cfg.sort_components, renormalized over the
// components present. Throws NoDefinedComponents.
double CompositeDqi(const ImpactVector& iv, const DqiConfig& cfg);

Color ColorForPercentile(double percentile, const DqiConfig& cfg);

// Normalized mutual information I(X;Y) / min(H(X), H(Y)); 0 when the
// smaller entropy is 0. counts is row-major rows x cols.
double NormalizedMutualInformation(const std::vector<std::size_t>& counts,
                                   std::size_t rows, std::size_t cols);

// Equal-width bin of a value clamped to [0, 1].
std::size_t BinOf(double value, int bins);

struct Recommendation {
  std::string kind;
  std::string target;  // offending token, n-gram or sample id
  std::string detail;  // suggested action

  bool operator==(const Recommendation&) const = default;
};

struct ComponentFeedback {
  Component component = Component::kC1;
  double score = 0.0;          // the draft's impact
  double percentile = 0.0;     // of score among the other samples' impacts
  double dataset_value = 0.0;  // component value with the draft included
  Color color = Color::kYellow;
  std::string feedback;
  std::vector<Recommendation> recommendations;
  NamedValues terms;  // sub-term impacts

  bool operator==(const ComponentFeedback&) const = default;
};

struct DqiReport {
  std::vector<ComponentFeedback> components;  // defined components only
  std::optional<double> composite;
  std::size_t dataset_size_at_eval = 0;

  const ComponentFeedback* Find(Component c) const;
  // term_level adds each component's sub-term impacts.
  std::string ToJson(bool term_level = false) const;
  static DqiReport FromJson(std::string_view json);

  bool operator==(const DqiReport&) const = default;
};

// Evaluates a draft against state + {draft}. The draft's id may be empty; a
// placeholder id is used internally. Colors come from the draft's impact
// percentile among the state samples' impacts in the same dataset. Throws
// SchemaMismatch or EmptyState (fewer than 2 state samples).
DqiReport QualityReport(const Dataset& state, const EmbeddingMatrix* emb,
                        const Sample& draft, const DqiConfig& cfg);

}  // namespace dqsel

#endif  // DQSEL_DQI_H_
