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

#ifndef DQSEL_SYNTHETIC_H_
#define DQSEL_SYNTHETIC_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dqsel/corpus.h"
#include "dqsel/embeddings.h"

namespace dqsel {

// Three-way NLI schema: premise, hypothesis; entailment, neutral,
// contradiction.
TaskSchema NliSchema();

struct PlantedConfig {
  std::size_t samples = 2000;
  std::size_t planted = 200;  // a multiple of copies
  std::size_t copies = 8;     // exact copies per planted text
  std::size_t dim = 16;
  std::uint64_t seed = 1;
  double giveaway_rate = 0.05;  // share of ordinary samples that carry the token
  double planted_shift = 4.0;   // offset of feature 0 for planted samples
};

// A corpus with a planted artifact: planted samples are groups of exact
// duplicates (text and features), all labelled "contradiction", all carrying
// the give-away token, and linearly separable on feature 0. Ordinary samples have random labels,
// standard normal features and fresh vocabulary.
struct PlantedCorpus {
  Dataset dataset;
  EmbeddingMatrix embeddings;
  std::vector<std::string> planted_ids;
  std::string giveaway = "not";
  std::string planted_label = "contradiction";
};

PlantedCorpus MakePlantedCorpus(const PlantedConfig& cfg);

// NMI between presence of `token` in a sample and its label.
double TokenLabelNmi(const Dataset& d, const std::string& token);

}  // namespace dqsel

#endif  // DQSEL_SYNTHETIC_H_
