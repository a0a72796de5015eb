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

#ifndef DQSEL_TEXTSTATS_H_
#define DQSEL_TEXTSTATS_H_

#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dqsel/corpus.h"

namespace dqsel {

// Lowercased tokens; never contains an empty string.
using TokenSeq = std::vector<std::string>;

// Sorted, duplicate-free token set.
using TokenSet = std::vector<std::string>;

enum class PosClass { kAdj, kAdv, kNoun, kVerb, kOther };

std::string_view PosClassName(PosClass c);

// Lowercases ASCII letters and splits on every maximal run of characters that
// are not ASCII alphanumerics. Bytes >= 0x80 (UTF-8 continuation and lead
// bytes) count as word characters so non-English words survive intact.
TokenSeq Tokenize(std::string_view text);

// Tokens of every schema field in order, concatenated.
TokenSeq TokenizeSample(const Sample& sample, const TaskSchema& schema);

TokenSet ToSet(const TokenSeq& tokens);

class PosTagger {
 public:
  virtual ~PosTagger() = default;
  virtual PosClass Tag(std::string_view token) const = 0;

  std::vector<PosClass> TagAll(const TokenSeq& tokens) const;
};

// Lexicon lookup first, then suffix rules (-ly ADV; -ing/-ed VERB;
// -ness/-tion/-ity NOUN; -ous/-ful/-ive ADJ), else OTHER.
class LexiconTagger : public PosTagger {
 public:
  // Lexicon text: one `word<TAB>CLASS` per line, CLASS in ADJ|ADV|NOUN|VERB.
  // '#' starts a comment line.
  explicit LexiconTagger(std::string_view lexicon_text);

  // Tagger over the lexicon bundled with the library.
  static const LexiconTagger& Default();

  PosClass Tag(std::string_view token) const override;
  std::size_t lexicon_size() const { return lexicon_.size(); }

 private:
  std::unordered_map<std::string, PosClass> lexicon_;
};

std::vector<PosClass> TagCoarse(const TokenSeq& tokens);

// In-order windows of length n, multiplicity preserved. Throws
// Error(kInvalidOrder) when n < 1.
std::vector<std::vector<std::string>> ExtractNgrams(const TokenSeq& tokens, int n);

// Same windows as single strings joined with U+001F; cheaper to hash.
std::vector<std::string> NgramKeys(const TokenSeq& tokens, int n);

// |a ∩ b| / |a ∪ b| over sorted sets; 1.0 when both are empty.
double Jaccard(const TokenSet& a, const TokenSet& b);

// Same as Jaccard on sorted integer id sets.
double JaccardIds(const std::vector<std::uint32_t>& a,
                  const std::vector<std::uint32_t>& b);

enum class Granularity { kUnigram, kBigram, kTrigram, kPos };

std::string_view GranularityName(Granularity g);

// Distinct features of a sample at one granularity.
std::vector<std::string> SampleFeatures(const Sample& sample,
                                        const TaskSchema& schema, Granularity g);

// Label-conditioned pointwise mutual information, log base 2, from
// sample-presence counts. For feature f and label l, the 2 x L table
// (f present / absent by label) gets `alpha` added to every cell:
//   pmi(f, l) = log2( n'(f,l) * N' / (n'(f) * n'(l)) )
// with n'(f,l) = n(f,l) + alpha, n'(f) = n(f) + L*alpha,
// n'(l) = n(l) + 2*alpha, N' = N + 2*L*alpha.
class PmiTable {
 public:
  PmiTable() = default;

  Granularity granularity() const { return granularity_; }
  double alpha() const { return alpha_; }
  std::size_t num_samples() const { return num_samples_; }

  // Pmi for a feature never seen in the dataset is computed from zero counts
  // (finite when alpha > 0, -inf or NaN when alpha == 0).
  double Pmi(const std::string& feature, const std::string& label) const;

  // Every (feature, label) pair with n(f, l) > 0.
  std::map<std::pair<std::string, std::string>, double> Entries() const;

  std::size_t FeatureCount(const std::string& feature) const;
  std::size_t JointCount(const std::string& feature, const std::string& label) const;

 private:
  friend PmiTable LabelPmi(const Dataset&, Granularity, double);

  Granularity granularity_ = Granularity::kUnigram;
  double alpha_ = 0.0;
  std::size_t num_samples_ = 0;
  std::vector<std::string> labels_;
  std::vector<std::size_t> label_counts_;
  // feature -> per-label presence counts
  std::unordered_map<std::string, std::vector<std::size_t>> joint_;
};

// Throws Error(kEmptyDataset) for an empty dataset and kInvalidConfig for
// negative alpha.
PmiTable LabelPmi(const Dataset& d, Granularity g, double alpha);

// Closed form used by PmiTable, exposed so other modules share one formula.
double SmoothedPmi(double joint, double feature, double label, double total,
                   double alpha, std::size_t num_labels);

}  // namespace dqsel

#endif  // DQSEL_TEXTSTATS_H_
