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

#include "dqsel/textstats.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "dqsel/error.h"

namespace dqsel {

namespace internal {
std::string_view BundledLexicon();
}  // namespace internal

namespace {

constexpr char kNgramSep = '\x1f';

bool IsWordByte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z') || c >= 0x80;
}

bool EndsWith(std::string_view s, std::string_view suffix) {
  return s.size() > suffix.size() &&
         s.substr(s.size() - suffix.size()) == suffix;
}

std::optional<PosClass> ParsePosClass(std::string_view name) {
  if (name == "ADJ") return PosClass::kAdj;
  if (name == "ADV") return PosClass::kAdv;
  if (name == "NOUN") return PosClass::kNoun;
  if (name == "VERB") return PosClass::kVerb;
  if (name == "OTHER") return PosClass::kOther;
  return std::nullopt;
}

}  // namespace

std::string_view PosClassName(PosClass c) {
  switch (c) {
    case PosClass::kAdj: return "ADJ";
    case PosClass::kAdv: return "ADV";
    case PosClass::kNoun: return "NOUN";
    case PosClass::kVerb: return "VERB";
    case PosClass::kOther: return "OTHER";
  }
  return "OTHER";
}

TokenSeq Tokenize(std::string_view text) {
  TokenSeq tokens;
  std::string current;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (IsWordByte(c)) {
      current += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : ch;
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

TokenSeq TokenizeSample(const Sample& sample, const TaskSchema& schema) {
  TokenSeq out;
  for (const auto& name : schema.field_names) {
    auto it = sample.fields.find(name);
    if (it == sample.fields.end()) continue;
    TokenSeq part = Tokenize(it->second);
    out.insert(out.end(), std::make_move_iterator(part.begin()),
               std::make_move_iterator(part.end()));
  }
  return out;
}

TokenSet ToSet(const TokenSeq& tokens) {
  TokenSet set(tokens);
  std::sort(set.begin(), set.end());
  set.erase(std::unique(set.begin(), set.end()), set.end());
  return set;
}

std::vector<PosClass> PosTagger::TagAll(const TokenSeq& tokens) const {
  std::vector<PosClass> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(Tag(t));
  return out;
}

LexiconTagger::LexiconTagger(std::string_view lexicon_text) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < lexicon_text.size()) {
    std::size_t end = lexicon_text.find('\n', pos);
    if (end == std::string_view::npos) end = lexicon_text.size();
    std::string_view line = lexicon_text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    std::size_t tab = line.find('\t');
    std::optional<PosClass> cls;
    if (tab != std::string_view::npos) cls = ParsePosClass(line.substr(tab + 1));
    if (!cls) {
      throw Error(ErrorCode::kInvalidConfig,
                  "lexicon line " + std::to_string(line_no) + " is not word<TAB>CLASS");
    }
    lexicon_.emplace(std::string(line.substr(0, tab)), *cls);
  }
}

const LexiconTagger& LexiconTagger::Default() {
  static const LexiconTagger tagger(internal::BundledLexicon());
  return tagger;
}

PosClass LexiconTagger::Tag(std::string_view token) const {
  if (auto it = lexicon_.find(std::string(token)); it != lexicon_.end()) {
    return it->second;
  }
  if (EndsWith(token, "ly")) return PosClass::kAdv;
  if (EndsWith(token, "ing") || EndsWith(token, "ed")) return PosClass::kVerb;
  if (EndsWith(token, "ness") || EndsWith(token, "tion") || EndsWith(token, "ity")) {
    return PosClass::kNoun;
  }
  if (EndsWith(token, "ous") || EndsWith(token, "ful") || EndsWith(token, "ive")) {
    return PosClass::kAdj;
  }
  return PosClass::kOther;
}

std::vector<PosClass> TagCoarse(const TokenSeq& tokens) {
  return LexiconTagger::Default().TagAll(tokens);
}

std::vector<std::vector<std::string>> ExtractNgrams(const TokenSeq& tokens, int n) {
  if (n < 1) throw Error(ErrorCode::kInvalidOrder, "n-gram order must be >= 1");
  std::vector<std::vector<std::string>> out;
  auto order = static_cast<std::size_t>(n);
  if (tokens.size() < order) return out;
  out.reserve(tokens.size() - order + 1);
  for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
    out.emplace_back(tokens.begin() + i, tokens.begin() + i + order);
  }
  return out;
}

std::vector<std::string> NgramKeys(const TokenSeq& tokens, int n) {
  if (n < 1) throw Error(ErrorCode::kInvalidOrder, "n-gram order must be >= 1");
  std::vector<std::string> out;
  auto order = static_cast<std::size_t>(n);
  if (tokens.size() < order) return out;
  out.reserve(tokens.size() - order + 1);
  for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (std::size_t j = 1; j < order; ++j) {
      key += kNgramSep;
      key += tokens[i + j];
    }
    out.push_back(std::move(key));
  }
  return out;
}

double Jaccard(const TokenSet& a, const TokenSet& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++inter;
      ++ia;
      ++ib;
    }
  }
  return static_cast<double>(inter) /
         static_cast<double>(a.size() + b.size() - inter);
}

double JaccardIds(const std::vector<std::uint32_t>& a,
                  const std::vector<std::uint32_t>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      ++inter;
      ++i;
      ++j;
    }
  }
  return static_cast<double>(inter) /
         static_cast<double>(a.size() + b.size() - inter);
}

std::string_view GranularityName(Granularity g) {
  switch (g) {
    case Granularity::kUnigram: return "unigram";
    case Granularity::kBigram: return "bigram";
    case Granularity::kTrigram: return "trigram";
    case Granularity::kPos: return "pos";
  }
  return "unigram";
}

std::vector<std::string> SampleFeatures(const Sample& sample,
                                        const TaskSchema& schema, Granularity g) {
  TokenSeq tokens = TokenizeSample(sample, schema);
  std::vector<std::string> features;
  switch (g) {
    case Granularity::kUnigram:
      features = tokens;
      break;
    case Granularity::kBigram:
      features = NgramKeys(tokens, 2);
      break;
    case Granularity::kTrigram:
      features = NgramKeys(tokens, 3);
      break;
    case Granularity::kPos:
      for (PosClass c : TagCoarse(tokens)) features.emplace_back(PosClassName(c));
      break;
  }
  std::sort(features.begin(), features.end());
  features.erase(std::unique(features.begin(), features.end()), features.end());
  return features;
}

double SmoothedPmi(double joint, double feature, double label, double total,
                   double alpha, std::size_t num_labels) {
  double l = static_cast<double>(num_labels);
  double nj = joint + alpha;
  double nf = feature + l * alpha;
  double nl = label + 2.0 * alpha;
  double nt = total + 2.0 * l * alpha;
  return std::log2(nj * nt / (nf * nl));
}

double PmiTable::Pmi(const std::string& feature, const std::string& label) const {
  std::size_t li = 0;
  while (li < labels_.size() && labels_[li] != label) ++li;
  double label_count = li < labels_.size() ? static_cast<double>(label_counts_[li]) : 0.0;
  double joint = 0.0;
  double feature_count = 0.0;
  if (auto it = joint_.find(feature); it != joint_.end()) {
    for (std::size_t c : it->second) feature_count += static_cast<double>(c);
    if (li < labels_.size()) joint = static_cast<double>(it->second[li]);
  }
  return SmoothedPmi(joint, feature_count, label_count,
                     static_cast<double>(num_samples_), alpha_, labels_.size());
}

std::map<std::pair<std::string, std::string>, double> PmiTable::Entries() const {
  std::map<std::pair<std::string, std::string>, double> out;
  for (const auto& [feature, counts] : joint_) {
    for (std::size_t li = 0; li < labels_.size(); ++li) {
      if (counts[li] > 0) out[{feature, labels_[li]}] = Pmi(feature, labels_[li]);
    }
  }
  return out;
}

std::size_t PmiTable::FeatureCount(const std::string& feature) const {
  auto it = joint_.find(feature);
  if (it == joint_.end()) return 0;
  std::size_t total = 0;
  for (std::size_t c : it->second) total += c;
  return total;
}

std::size_t PmiTable::JointCount(const std::string& feature,
                                 const std::string& label) const {
  auto it = joint_.find(feature);
  if (it == joint_.end()) return 0;
  for (std::size_t li = 0; li < labels_.size(); ++li) {
    if (labels_[li] == label) return it->second[li];
  }
  return 0;
}

PmiTable LabelPmi(const Dataset& d, Granularity g, double alpha) {
  if (d.empty()) throw Error(ErrorCode::kEmptyDataset, "pmi over an empty dataset");
  if (!(alpha >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "alpha must be >= 0");
  PmiTable table;
  table.granularity_ = g;
  table.alpha_ = alpha;
  table.num_samples_ = d.size();
  table.labels_ = d.schema().labels;
  table.label_counts_.assign(table.labels_.size(), 0);
  for (const auto& s : d.samples()) {
    std::size_t li = *d.schema().LabelIndex(s.label);
    ++table.label_counts_[li];
    for (auto& f : SampleFeatures(s, d.schema(), g)) {
      auto& counts = table.joint_[f];
      if (counts.empty()) counts.assign(table.labels_.size(), 0);
      ++counts[li];
    }
  }
  return table;
}

}  // namespace dqsel
