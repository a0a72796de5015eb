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

#include "dqsel/synthetic.h"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <iterator>
#include <set>

#include "dqsel/dqi.h"
#include "dqsel/error.h"
#include "dqsel/rng.h"
#include "dqsel/textstats.h"

namespace dqsel {

namespace {

constexpr const char* kStopwords[] = {"a",    "the",  "is",   "of",  "in",
                                      "on",   "and",  "to",   "at",  "with",
                                      "by",   "for",  "from", "it",  "was",
                                      "this", "that", "are",  "as",  "be"};
constexpr std::size_t kNumStopwords = std::size(kStopwords);

// Two thirds fresh words, one third stopwords, in every field.
class TextMaker {
 public:
  explicit TextMaker(Rng& rng) : rng_(rng) {}

  std::vector<std::string> Field(std::size_t stop_count) {
    std::vector<std::string> words;
    for (std::size_t i = 0; i < 2 * stop_count; ++i) {
      words.push_back("w" + std::to_string(next_word_++));
    }
    for (std::size_t i = 0; i < stop_count; ++i) {
      words.emplace_back(kStopwords[rng_.UniformIndex(kNumStopwords)]);
    }
    rng_.Shuffle(words);
    return words;
  }

 private:
  Rng& rng_;
  std::size_t next_word_ = 0;
};

std::string Join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

// Replaces one stopword with the give-away token.
void PlantToken(std::vector<std::string>& words, const std::string& token) {
  for (auto& w : words) {
    bool fresh = w.size() > 1 && w[0] == 'w' && std::isdigit(static_cast<unsigned char>(w[1]));
    if (!fresh) {
      w = token;
      return;
    }
  }
}

}  // namespace

TaskSchema NliSchema() {
  return TaskSchema{"nli", {"premise", "hypothesis"},
                    {"entailment", "neutral", "contradiction"}};
}

PlantedCorpus MakePlantedCorpus(const PlantedConfig& cfg) {
  if (cfg.copies < 2 || cfg.planted % cfg.copies != 0 || cfg.planted > cfg.samples ||
      cfg.dim == 0) {
    throw Error(ErrorCode::kInvalidConfig,
                "planted must be a multiple of copies (>= 2) and <= samples; dim >= 1");
  }
  Rng rng(DeriveSeed(cfg.seed, 0x5e7));
  TaskSchema schema = NliSchema();
  PlantedCorpus out;

  // Each group's first position carries the text; the rest copy it.
  std::vector<std::size_t> draw = rng.SampleWithoutReplacement(cfg.samples, cfg.planted);
  std::vector<std::size_t> source(cfg.samples, cfg.samples);
  std::vector<char> planted(cfg.samples, 0);
  for (std::size_t g = 0; g < draw.size(); g += cfg.copies) {
    std::size_t first = *std::min_element(draw.begin() + g, draw.begin() + g + cfg.copies);
    for (std::size_t k = g; k < g + cfg.copies; ++k) {
      planted[draw[k]] = 1;
      if (draw[k] != first) source[draw[k]] = first;
    }
  }

  TextMaker text(rng);
  std::vector<Sample> samples(cfg.samples);
  std::vector<float> values(cfg.samples * cfg.dim);
  std::vector<std::string> order(cfg.samples);
  for (std::size_t i = 0; i < cfg.samples; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "s%05zu", i);
    order[i] = id;
    Sample& s = samples[i];
    s.id = id;
    float* row = values.data() + i * cfg.dim;
    if (planted[i] && source[i] < cfg.samples) {
      const Sample& twin = samples[source[i]];
      s.fields = twin.fields;
      s.label = twin.label;
      std::copy_n(values.data() + source[i] * cfg.dim, cfg.dim, row);
      out.planted_ids.push_back(s.id);
      continue;
    }
    // Mostly short samples with a long tail, so length dispersion saturates.
    bool long_sample = rng.UniformReal() < 0.15;
    std::size_t premise_stop = long_sample ? 20 + rng.UniformIndex(20) : 2;
    std::size_t hypothesis_stop = long_sample ? 10 + rng.UniformIndex(10) : 1;
    if (planted[i]) {
      premise_stop = 2;
      hypothesis_stop = 1;
    }
    auto premise = text.Field(premise_stop);
    auto hypothesis = text.Field(hypothesis_stop);
    if (planted[i]) {
      s.label = out.planted_label;
      PlantToken(hypothesis, out.giveaway);
    } else {
      s.label = schema.labels[rng.UniformIndex(schema.labels.size())];
      if (rng.UniformReal() < cfg.giveaway_rate) PlantToken(hypothesis, out.giveaway);
    }
    s.fields["premise"] = Join(premise);
    s.fields["hypothesis"] = Join(hypothesis);
    for (std::size_t c = 0; c < cfg.dim; ++c) row[c] = static_cast<float>(rng.Normal());
    if (planted[i]) row[0] += static_cast<float>(cfg.planted_shift);
    if (planted[i]) out.planted_ids.push_back(s.id);
  }
  std::sort(out.planted_ids.begin(), out.planted_ids.end());
  out.dataset = Dataset(schema, std::move(samples));
  out.embeddings = EmbeddingMatrix(cfg.dim, std::move(values), std::move(order));
  return out;
}

double TokenLabelNmi(const Dataset& d, const std::string& token) {
  const std::size_t labels = d.schema().labels.size();
  std::vector<std::size_t> table(2 * labels, 0);
  for (const auto& s : d.samples()) {
    bool present = false;
    for (const auto& [name, text] : s.fields) {
      auto tokens = Tokenize(text);
      present = present || std::find(tokens.begin(), tokens.end(), token) != tokens.end();
    }
    ++table[(present ? 1 : 0) * labels + *d.schema().LabelIndex(s.label)];
  }
  return NormalizedMutualInformation(table, 2, labels);
}

}  // namespace dqsel
