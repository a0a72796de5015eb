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

#include "dqsel/dqi.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

#include "dqsel/error.h"
#include "dqsel/textstats.h"
#include "json_util.h"
#include "parallel.h"

namespace dqsel {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

std::size_t Idx(Component c) { return static_cast<std::size_t>(c); }

struct PreparedSample {
  TokenSeq all;
  std::vector<TokenSeq> fields;
  TokenSet set;
};

std::vector<PreparedSample> Prepare(const Dataset& d) {
  std::vector<PreparedSample> out(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Sample& s = d[i];
    for (const auto& name : d.schema().field_names) {
      out[i].fields.push_back(Tokenize(s.fields.at(name)));
      const auto& f = out[i].fields.back();
      out[i].all.insert(out[i].all.end(), f.begin(), f.end());
    }
    out[i].set = ToSet(out[i].all);
  }
  return out;
}

// Granularities of C2: n-grams within each field for n = 1..ngram_max, the
// coarse POS class of every token, and each whole field as one "sentence".
std::vector<std::string> GranularityNames(int ngram_max) {
  std::vector<std::string> names;
  for (int n = 1; n <= ngram_max; ++n) {
    if (n == 1) names.push_back("unigram");
    else if (n == 2) names.push_back("bigram");
    else if (n == 3) names.push_back("trigram");
    else names.push_back(std::to_string(n) + "gram");
  }
  names.push_back("pos");
  names.push_back("sentence");
  return names;
}

std::vector<std::string> GranularityFeatures(const PreparedSample& s, int ngram_max,
                                             std::size_t g) {
  std::vector<std::string> out;
  auto order = static_cast<int>(g) + 1;
  if (order <= ngram_max) {
    for (const auto& field : s.fields) {
      auto keys = NgramKeys(field, order);
      out.insert(out.end(), keys.begin(), keys.end());
    }
  } else if (order == ngram_max + 1) {
    for (PosClass c : TagCoarse(s.all)) out.emplace_back(PosClassName(c));
  } else {
    for (const auto& field : s.fields) {
      std::string sentence;
      for (const auto& t : field) {
        if (!sentence.empty()) sentence += ' ';
        sentence += t;
      }
      out.push_back(std::move(sentence));
    }
  }
  return out;
}

double HarmonicMean(double a, double b) {
  return a + b > 0.0 ? 2.0 * a * b / (a + b) : 0.0;
}

double FieldOverlap(const PreparedSample& s) {
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < s.fields.size(); ++a) {
    for (std::size_t b = a + 1; b < s.fields.size(); ++b) {
      total += Jaccard(ToSet(s.fields[a]), ToSet(s.fields[b]));
      ++pairs;
    }
  }
  return pairs ? total / static_cast<double>(pairs) : 0.0;
}

double BagOfWordsCosine(const TokenSeq& a, const TokenSeq& b) {
  std::map<std::string, std::pair<double, double>> counts;
  for (const auto& t : a) counts[t].first += 1.0;
  for (const auto& t : b) counts[t].second += 1.0;
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (const auto& [token, c] : counts) {
    dot += c.first * c.second;
    na += c.first * c.first;
    nb += c.second * c.second;
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double FieldCosine(const PreparedSample& s) {
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < s.fields.size(); ++a) {
    for (std::size_t b = a + 1; b < s.fields.size(); ++b) {
      total += BagOfWordsCosine(s.fields[a], s.fields[b]);
      ++pairs;
    }
  }
  return pairs ? total / static_cast<double>(pairs) : 0.0;
}

bool CoversAll(const Dataset& d, const EmbeddingMatrix& emb) {
  for (const auto& s : d.samples()) {
    if (!emb.Find(s.id)) return false;
  }
  return true;
}

bool UseEmbeddings(const Dataset& d, const EmbeddingMatrix* emb, const DqiConfig& cfg) {
  switch (cfg.c5_source) {
    case SimilaritySource::kBagOfWords:
      return false;
    case SimilaritySource::kEmbedding:
      if (emb == nullptr || !CoversAll(d, *emb)) {
        throw Error(ErrorCode::kMissingEmbeddings,
                    "c5_source=embedding needs a row for every sample");
      }
      return true;
    case SimilaritySource::kAuto:
      return emb != nullptr && CoversAll(d, *emb);
  }
  return false;
}

bool IsTrain(const Sample& s) { return s.split && *s.split == "train"; }
bool IsEval(const Sample& s) { return s.split && *s.split != "train"; }

std::size_t LabelOf(const Dataset& d, std::size_t i) {
  return *d.schema().LabelIndex(d[i].label);
}

double Log2(double x) { return std::log2(x); }

// Direct evaluation: every term recomputed from raw samples.
struct DirectResult {
  DqiVector scores;
  std::array<NamedValues, kNumComponents> terms;
};

DirectResult DirectEvaluate(const Dataset& d, const EmbeddingMatrix* emb,
                            const DqiConfig& cfg) {
  cfg.Validate();
  if (d.size() < 2) {
    throw Error(ErrorCode::kDatasetTooSmall, "DQI needs at least 2 samples");
  }
  const std::size_t n = d.size();
  const std::size_t num_labels = d.schema().labels.size();
  std::vector<PreparedSample> prep = Prepare(d);
  DirectResult r;

  // C1
  {
    std::set<std::string> vocab;
    double total = 0.0;
    for (const auto& p : prep) {
      vocab.insert(p.all.begin(), p.all.end());
      total += static_cast<double>(p.all.size());
    }
    double richness = total > 0.0 ? static_cast<double>(vocab.size()) / total : 0.0;
    double mean = total / static_cast<double>(n);
    double var = 0.0;
    for (const auto& p : prep) {
      double dev = static_cast<double>(p.all.size()) - mean;
      var += dev * dev;
    }
    var /= static_cast<double>(n);
    double dispersion = mean > 0.0 ? std::min(1.0, std::sqrt(var) / mean) : 0.0;
    r.scores[Component::kC1] = HarmonicMean(richness, dispersion);
    r.terms[Idx(Component::kC1)] = {{"richness", richness}, {"dispersion", dispersion}};
  }

  // C2
  {
    auto names = GranularityNames(cfg.ngram_max);
    double sum = 0.0;
    for (std::size_t g = 0; g < names.size(); ++g) {
      std::map<std::string, double> counts;
      double total = 0.0;
      for (const auto& p : prep) {
        for (auto& f : GranularityFeatures(p, cfg.ngram_max, g)) {
          counts[f] += 1.0;
          total += 1.0;
        }
      }
      double value = 1.0;
      if (counts.size() > 1) {
        double h = 0.0;
        for (const auto& [f, c] : counts) {
          double prob = c / total;
          h -= prob * std::log(prob);
        }
        value = h / std::log(static_cast<double>(counts.size()));
      }
      r.terms[Idx(Component::kC2)].emplace_back(names[g], value);
      sum += value;
    }
    r.scores[Component::kC2] = sum / static_cast<double>(names.size());
  }

  // C3
  {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = kNegInf;
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) best = std::max(best, Jaccard(prep[i].set, prep[j].set));
      }
      sum += 1.0 - best;
    }
    double v = sum / static_cast<double>(n);
    r.scores[Component::kC3] = v;
    r.terms[Idx(Component::kC3)] = {{"inter_sample_overlap", v}};
  }

  auto nmi_term = [&](const std::vector<double>& values) {
    auto bins = static_cast<std::size_t>(cfg.mi_bins);
    std::vector<std::size_t> table(bins * num_labels, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++table[BinOf(values[i], cfg.mi_bins) * num_labels + LabelOf(d, i)];
    }
    return 1.0 - NormalizedMutualInformation(table, bins, num_labels);
  };

  // C4
  if (d.schema().field_names.size() >= 2) {
    std::vector<double> overlap(n);
    for (std::size_t i = 0; i < n; ++i) overlap[i] = FieldOverlap(prep[i]);
    double v = nmi_term(overlap);
    r.scores[Component::kC4] = v;
    r.terms[Idx(Component::kC4)] = {{"field_overlap_label_nmi", v}};
  }

  // C5
  {
    bool use_emb = UseEmbeddings(d, emb, cfg);
    std::vector<double> sim(n, 0.0);
    bool defined = true;
    if (use_emb) {
      std::vector<std::span<const float>> rows;
      for (const auto& s : d.samples()) rows.push_back(emb->Row(*emb->Find(s.id)));
      for (std::size_t i = 0; i < n; ++i) {
        double best = kNegInf;
        for (std::size_t j = 0; j < n; ++j) {
          if (j != i) best = std::max(best, Cosine(rows[i], rows[j]));
        }
        sim[i] = best;
      }
    } else if (d.schema().field_names.size() >= 2) {
      for (std::size_t i = 0; i < n; ++i) sim[i] = FieldCosine(prep[i]);
    } else {
      defined = false;
    }
    if (defined) {
      double v = nmi_term(sim);
      r.scores[Component::kC5] = v;
      r.terms[Idx(Component::kC5)] = {
          {use_emb ? "embedding_similarity_label_nmi" : "field_cosine_label_nmi", v}};
    }
  }

  // C6
  {
    PmiTable table = LabelPmi(d, Granularity::kUnigram, cfg.pmi_alpha);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& features = prep[i].set;
      double mean = 0.0;
      for (const auto& f : features) mean += table.Pmi(f, d[i].label);
      if (!features.empty()) mean /= static_cast<double>(features.size());
      sum += 1.0 / (1.0 + std::max(0.0, mean));
    }
    double v = sum / static_cast<double>(n);
    r.scores[Component::kC6] = v;
    r.terms[Idx(Component::kC6)] = {{"label_pmi", v}};
  }

  // C7
  {
    std::vector<std::size_t> train;
    std::vector<std::size_t> eval;
    for (std::size_t i = 0; i < n; ++i) {
      if (IsTrain(d[i])) train.push_back(i);
      if (IsEval(d[i])) eval.push_back(i);
    }
    if (!train.empty() && !eval.empty()) {
      double sum = 0.0;
      for (std::size_t e : eval) {
        double best = kNegInf;
        for (std::size_t t : train) best = std::max(best, Jaccard(prep[e].set, prep[t].set));
        sum += 1.0 - best;
      }
      double v = sum / static_cast<double>(eval.size());
      r.scores[Component::kC7] = v;
      r.terms[Idx(Component::kC7)] = {{"split_overlap", v}};
    }
  }
  return r;
}

// Best value, how many partners reach it, and the runner-up value.
struct Top2 {
  double best = kNegInf;
  std::uint32_t count = 0;
  double second = kNegInf;
  std::size_t arg = kNone;

  void Offer(double v, std::size_t j) {
    if (v > best) {
      second = std::max(second, best);
      best = v;
      count = 1;
      arg = j;
    } else if (v == best) {
      ++count;
    } else if (v > second) {
      second = v;
    }
  }

  // Best after removing one partner whose value was v.
  double Without(double v) const {
    return (v == best && count == 1) ? second : best;
  }
};

}  // namespace

std::size_t BinOf(double value, int bins) {
  double x = std::clamp(value, 0.0, 1.0);
  auto b = static_cast<std::size_t>(std::floor(x * bins + 1e-9));
  return std::min(b, static_cast<std::size_t>(bins - 1));
}

double NormalizedMutualInformation(const std::vector<std::size_t>& counts,
                                   std::size_t rows, std::size_t cols) {
  double total = 0.0;
  std::vector<double> row_sum(rows, 0.0);
  std::vector<double> col_sum(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      auto v = static_cast<double>(counts[r * cols + c]);
      row_sum[r] += v;
      col_sum[c] += v;
      total += v;
    }
  }
  if (total <= 0.0) return 0.0;
  auto entropy = [&](const std::vector<double>& sums) {
    double h = 0.0;
    for (double s : sums) {
      if (s > 0.0) h -= (s / total) * std::log(s / total);
    }
    return h;
  };
  double hx = entropy(row_sum);
  double hy = entropy(col_sum);
  double denom = std::min(hx, hy);
  if (denom <= 1e-15) return 0.0;
  double mi = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      auto v = static_cast<double>(counts[r * cols + c]);
      if (v > 0.0) mi += (v / total) * std::log(v * total / (row_sum[r] * col_sum[c]));
    }
  }
  return std::clamp(mi / denom, 0.0, 1.0);
}

DqiVector ComponentScores(const Dataset& d, const EmbeddingMatrix* emb,
                          const DqiConfig& cfg) {
  return DirectEvaluate(d, emb, cfg).scores;
}

std::array<NamedValues, kNumComponents> ComponentTerms(const Dataset& d,
                                                       const EmbeddingMatrix* emb,
                                                       const DqiConfig& cfg) {
  return DirectEvaluate(d, emb, cfg).terms;
}

// ---------------------------------------------------------------------------
// Incremental engine

struct DqiEngine::State {
  DqiConfig cfg;
  ComponentMask mask;
  std::size_t threads = 0;
  std::size_t n = 0;
  std::size_t num_labels = 0;
  std::vector<std::size_t> label;
  std::vector<std::vector<std::uint32_t>> sets;  // distinct token ids

  // C1: per-sample (token id, count) and global aggregates.
  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> type_counts;
  std::vector<std::uint64_t> global_type_count;
  std::uint64_t vocab = 0;
  std::vector<std::uint64_t> length;
  std::uint64_t sum_len = 0;
  std::uint64_t sum_len2 = 0;

  // C2
  struct Gran {
    std::string name;
    std::vector<std::uint64_t> counts;
    std::uint64_t total = 0;
    double sum_clogc = 0.0;
    std::uint64_t support = 0;
    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> per_sample;
  };
  std::vector<Gran> grans;

  // C3
  std::vector<Top2> c3;

  // C4 / C5 binned label contingency.
  bool c4_defined = false;
  std::vector<std::size_t> c4_bin;
  std::vector<std::size_t> c4_table;
  bool c5_defined = false;
  bool c5_emb = false;
  std::size_t emb_dim = 0;
  std::vector<float> emb_rows;
  std::vector<Top2> c5_top;
  std::vector<std::size_t> c5_bin;
  std::vector<std::size_t> c5_table;

  // C6
  std::vector<std::uint64_t> joint;  // feature * num_labels + label
  std::vector<std::uint64_t> feature_count;
  std::vector<std::uint64_t> label_count;
  std::vector<std::vector<std::uint32_t>> postings;
  std::vector<double> pmi_sum;  // sum over features of log2 n'(f,l) - log2 n'(f)

  // C7
  std::vector<char> is_train;
  std::vector<char> is_eval;
  std::size_t n_train = 0;
  std::size_t n_eval = 0;
  std::vector<Top2> c7;

  bool Want(Component c) const { return mask.test(Idx(c)); }

  std::span<const float> EmbRow(std::size_t i) const {
    return {emb_rows.data() + i * emb_dim, emb_dim};
  }

  double JaccardAt(std::size_t i, std::size_t j) const {
    return JaccardIds(sets[i], sets[j]);
  }

  static double NormalizedEntropy(std::uint64_t total, double sum_clogc,
                                  std::uint64_t support) {
    if (support <= 1) return 1.0;
    double t = static_cast<double>(total);
    double h = std::log(t) - sum_clogc / t;
    return h / std::log(static_cast<double>(support));
  }

  static double CLogC(std::uint64_t c) {
    return c == 0 ? 0.0 : static_cast<double>(c) * std::log(static_cast<double>(c));
  }

  double Richness(std::uint64_t v, std::uint64_t total) const {
    return total > 0 ? static_cast<double>(v) / static_cast<double>(total) : 0.0;
  }

  static double Dispersion(std::uint64_t count, std::uint64_t sum, std::uint64_t sum2) {
    if (sum == 0) return 0.0;
    // sigma / mu = sqrt(n * sum2 - sum^2) / sum, exact in integers.
    auto c = static_cast<long double>(count);
    long double num = c * static_cast<long double>(sum2) -
                      static_cast<long double>(sum) * static_cast<long double>(sum);
    if (num < 0) num = 0;
    return std::min(1.0, static_cast<double>(std::sqrt(num) / static_cast<long double>(sum)));
  }

  double Pmi6(std::size_t i) const {
    // mean pmi of sample i at the current counts
    if (sets[i].empty()) return 0.0;
    double a = static_cast<double>(num_labels);
    double alpha = cfg.pmi_alpha;
    double k = Log2(static_cast<double>(n) + 2.0 * a * alpha) -
               Log2(static_cast<double>(label_count[label[i]]) + 2.0 * alpha);
    return pmi_sum[i] / static_cast<double>(sets[i].size()) + k;
  }

  double Nmi(const std::vector<std::size_t>& table) const {
    return NormalizedMutualInformation(table, static_cast<std::size_t>(cfg.mi_bins),
                                       num_labels);
  }
};

DqiEngine::DqiEngine(const Dataset& d, const EmbeddingMatrix* emb,
                     const DqiConfig& cfg, ComponentMask mask, std::size_t threads)
    : state_(std::make_unique<State>()) {
  cfg.Validate();
  if (d.size() < 2) {
    throw Error(ErrorCode::kDatasetTooSmall, "DQI needs at least 2 samples");
  }
  State& st = *state_;
  st.cfg = cfg;
  st.mask = mask;
  st.threads = threads;
  st.n = d.size();
  st.num_labels = d.schema().labels.size();
  const std::size_t n = st.n;
  const std::size_t num_labels = st.num_labels;
  std::vector<PreparedSample> prep = Prepare(d);

  std::unordered_map<std::string, std::uint32_t> vocab_ids;
  auto intern = [&](const std::string& t) {
    auto [it, inserted] =
        vocab_ids.emplace(t, static_cast<std::uint32_t>(vocab_ids.size()));
    return it->second;
  };
  st.label.resize(n);
  st.sets.resize(n);
  st.type_counts.resize(n);
  st.length.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    st.label[i] = LabelOf(d, i);
    std::map<std::uint32_t, std::uint32_t> counts;
    for (const auto& t : prep[i].all) ++counts[intern(t)];
    st.type_counts[i].assign(counts.begin(), counts.end());
    for (const auto& [id, c] : counts) st.sets[i].push_back(id);
    st.length[i] = prep[i].all.size();
  }
  const std::size_t vocab_size = vocab_ids.size();

  if (st.Want(Component::kC1)) {
    st.global_type_count.assign(vocab_size, 0);
    for (std::size_t i = 0; i < n; ++i) {
      for (const auto& [id, c] : st.type_counts[i]) st.global_type_count[id] += c;
      st.sum_len += st.length[i];
      st.sum_len2 += st.length[i] * st.length[i];
    }
    for (auto c : st.global_type_count) st.vocab += c > 0;
  }

  if (st.Want(Component::kC2)) {
    auto names = GranularityNames(cfg.ngram_max);
    st.grans.resize(names.size());
    for (std::size_t g = 0; g < names.size(); ++g) {
      State::Gran& gran = st.grans[g];
      gran.name = names[g];
      gran.per_sample.resize(n);
      std::unordered_map<std::string, std::uint32_t> ids;
      for (std::size_t i = 0; i < n; ++i) {
        std::map<std::uint32_t, std::uint32_t> counts;
        for (auto& f : GranularityFeatures(prep[i], cfg.ngram_max, g)) {
          auto [it, inserted] = ids.emplace(std::move(f),
                                            static_cast<std::uint32_t>(ids.size()));
          ++counts[it->second];
        }
        gran.per_sample[i].assign(counts.begin(), counts.end());
      }
      gran.counts.assign(ids.size(), 0);
      for (std::size_t i = 0; i < n; ++i) {
        for (const auto& [id, c] : gran.per_sample[i]) {
          gran.counts[id] += c;
          gran.total += c;
        }
      }
      for (auto c : gran.counts) {
        gran.sum_clogc += State::CLogC(c);
        gran.support += c > 0;
      }
    }
  }

  if (st.Want(Component::kC3)) {
    st.c3.resize(n);
    internal::ParallelFor(n, threads, [&](std::size_t i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) st.c3[i].Offer(st.JaccardAt(i, j), j);
      }
    });
  }

  const auto bins = static_cast<std::size_t>(cfg.mi_bins);
  if (st.Want(Component::kC4) && d.schema().field_names.size() >= 2) {
    st.c4_defined = true;
    st.c4_bin.resize(n);
    st.c4_table.assign(bins * num_labels, 0);
    for (std::size_t i = 0; i < n; ++i) {
      st.c4_bin[i] = BinOf(FieldOverlap(prep[i]), cfg.mi_bins);
      ++st.c4_table[st.c4_bin[i] * num_labels + st.label[i]];
    }
  }

  if (st.Want(Component::kC5)) {
    st.c5_emb = UseEmbeddings(d, emb, cfg);
    if (st.c5_emb) {
      st.c5_defined = true;
      st.emb_dim = emb->dim();
      st.emb_rows.reserve(n * st.emb_dim);
      for (const auto& s : d.samples()) {
        auto row = emb->Row(*emb->Find(s.id));
        st.emb_rows.insert(st.emb_rows.end(), row.begin(), row.end());
      }
      st.c5_top.resize(n);
      internal::ParallelFor(n, threads, [&](std::size_t i) {
        for (std::size_t j = 0; j < n; ++j) {
          if (j != i) st.c5_top[i].Offer(Cosine(st.EmbRow(i), st.EmbRow(j)), j);
        }
      });
    } else if (d.schema().field_names.size() >= 2) {
      st.c5_defined = true;
    }
    if (st.c5_defined) {
      st.c5_bin.resize(n);
      st.c5_table.assign(bins * num_labels, 0);
      for (std::size_t i = 0; i < n; ++i) {
        double sim = st.c5_emb ? st.c5_top[i].best : FieldCosine(prep[i]);
        st.c5_bin[i] = BinOf(sim, cfg.mi_bins);
        ++st.c5_table[st.c5_bin[i] * num_labels + st.label[i]];
      }
    }
  }

  if (st.Want(Component::kC6)) {
    st.joint.assign(vocab_size * num_labels, 0);
    st.feature_count.assign(vocab_size, 0);
    st.label_count.assign(num_labels, 0);
    st.postings.assign(vocab_size, {});
    for (std::size_t i = 0; i < n; ++i) {
      ++st.label_count[st.label[i]];
      for (std::uint32_t f : st.sets[i]) {
        ++st.joint[f * num_labels + st.label[i]];
        ++st.feature_count[f];
        st.postings[f].push_back(static_cast<std::uint32_t>(i));
      }
    }
    double alpha = cfg.pmi_alpha;
    double a = static_cast<double>(num_labels);
    st.pmi_sum.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0.0;
      for (std::uint32_t f : st.sets[i]) {
        sum += Log2(static_cast<double>(st.joint[f * num_labels + st.label[i]]) + alpha) -
               Log2(static_cast<double>(st.feature_count[f]) + a * alpha);
      }
      st.pmi_sum[i] = sum;
    }
  }

  if (st.Want(Component::kC7)) {
    st.is_train.resize(n);
    st.is_eval.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      st.is_train[i] = IsTrain(d[i]);
      st.is_eval[i] = IsEval(d[i]);
      st.n_train += st.is_train[i];
      st.n_eval += st.is_eval[i];
    }
    st.c7.resize(n);
    internal::ParallelFor(n, threads, [&](std::size_t e) {
      if (!st.is_eval[e]) return;
      for (std::size_t t = 0; t < n; ++t) {
        if (st.is_train[t]) st.c7[e].Offer(st.JaccardAt(e, t), t);
      }
    });
  }
}

DqiEngine::~DqiEngine() = default;
DqiEngine::DqiEngine(DqiEngine&&) noexcept = default;
DqiEngine& DqiEngine::operator=(DqiEngine&&) noexcept = default;

std::size_t DqiEngine::size() const { return state_->n; }
bool DqiEngine::uses_embeddings() const { return state_->c5_emb; }

DqiVector DqiEngine::Scores() const {
  const State& st = *state_;
  DqiVector v;
  const double n = static_cast<double>(st.n);
  if (st.Want(Component::kC1)) {
    v[Component::kC1] = HarmonicMean(st.Richness(st.vocab, st.sum_len),
                                     State::Dispersion(st.n, st.sum_len, st.sum_len2));
  }
  if (st.Want(Component::kC2)) {
    double sum = 0.0;
    for (const auto& g : st.grans) {
      sum += State::NormalizedEntropy(g.total, g.sum_clogc, g.support);
    }
    v[Component::kC2] = sum / static_cast<double>(st.grans.size());
  }
  if (st.Want(Component::kC3)) {
    double sum = 0.0;
    for (const auto& t : st.c3) sum += 1.0 - t.best;
    v[Component::kC3] = sum / n;
  }
  if (st.c4_defined) v[Component::kC4] = 1.0 - st.Nmi(st.c4_table);
  if (st.c5_defined) v[Component::kC5] = 1.0 - st.Nmi(st.c5_table);
  if (st.Want(Component::kC6)) {
    double sum = 0.0;
    for (std::size_t i = 0; i < st.n; ++i) sum += 1.0 / (1.0 + std::max(0.0, st.Pmi6(i)));
    v[Component::kC6] = sum / n;
  }
  if (st.Want(Component::kC7) && st.n_train > 0 && st.n_eval > 0) {
    double sum = 0.0;
    for (std::size_t i = 0; i < st.n; ++i) {
      if (st.is_eval[i]) sum += 1.0 - st.c7[i].best;
    }
    v[Component::kC7] = sum / static_cast<double>(st.n_eval);
  }
  return v;
}

ImpactVector DqiEngine::Impact(std::size_t s) const {
  const State& st = *state_;
  if (st.n < 3) {
    throw Error(ErrorCode::kDatasetTooSmall, "leave-one-out needs at least 3 samples");
  }
  if (s >= st.n) throw Error(ErrorCode::kUnknownId, "sample index out of range");
  const std::size_t n = st.n;
  const std::size_t rest = n - 1;
  const double rest_d = static_cast<double>(rest);
  DqiVector base = Scores();
  ImpactVector iv;

  if (st.Want(Component::kC1)) {
    std::uint64_t vocab = st.vocab;
    for (const auto& [id, c] : st.type_counts[s]) {
      if (st.global_type_count[id] == c) --vocab;
    }
    std::uint64_t sum = st.sum_len - st.length[s];
    std::uint64_t sum2 = st.sum_len2 - st.length[s] * st.length[s];
    double richness = st.Richness(vocab, sum);
    double dispersion = State::Dispersion(rest, sum, sum2);
    double base_r = st.Richness(st.vocab, st.sum_len);
    double base_d = State::Dispersion(n, st.sum_len, st.sum_len2);
    iv[Component::kC1] = *base[Component::kC1] - HarmonicMean(richness, dispersion);
    iv.terms[Idx(Component::kC1)] = {{"richness", base_r - richness},
                                     {"dispersion", base_d - dispersion}};
  }

  if (st.Want(Component::kC2)) {
    double sum = 0.0;
    NamedValues terms;
    for (const auto& g : st.grans) {
      std::uint64_t total = g.total;
      double clogc = g.sum_clogc;
      std::uint64_t support = g.support;
      for (const auto& [id, c] : g.per_sample[s]) {
        std::uint64_t before = g.counts[id];
        std::uint64_t after = before - c;
        clogc += State::CLogC(after) - State::CLogC(before);
        total -= c;
        if (after == 0) --support;
      }
      double value = State::NormalizedEntropy(total, clogc, support);
      double base_value = State::NormalizedEntropy(g.total, g.sum_clogc, g.support);
      terms.emplace_back(g.name, base_value - value);
      sum += value;
    }
    iv[Component::kC2] = *base[Component::kC2] - sum / static_cast<double>(st.grans.size());
    iv.terms[Idx(Component::kC2)] = std::move(terms);
  }

  if (st.Want(Component::kC3)) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == s) continue;
      sum += 1.0 - st.c3[i].Without(st.JaccardAt(i, s));
    }
    double q = *base[Component::kC3] - sum / rest_d;
    iv[Component::kC3] = q;
    iv.terms[Idx(Component::kC3)] = {{"inter_sample_overlap", q}};
  }

  if (st.c4_defined) {
    std::vector<std::size_t> table = st.c4_table;
    --table[st.c4_bin[s] * st.num_labels + st.label[s]];
    double q = *base[Component::kC4] - (1.0 - st.Nmi(table));
    iv[Component::kC4] = q;
    iv.terms[Idx(Component::kC4)] = {{"field_overlap_label_nmi", q}};
  }

  if (st.c5_defined) {
    std::vector<std::size_t> table;
    if (st.c5_emb) {
      table.assign(st.c5_table.size(), 0);
      for (std::size_t i = 0; i < n; ++i) {
        if (i == s) continue;
        double sim = st.c5_top[i].Without(Cosine(st.EmbRow(i), st.EmbRow(s)));
        ++table[BinOf(sim, st.cfg.mi_bins) * st.num_labels + st.label[i]];
      }
    } else {
      table = st.c5_table;
      --table[st.c5_bin[s] * st.num_labels + st.label[s]];
    }
    double q = *base[Component::kC5] - (1.0 - st.Nmi(table));
    iv[Component::kC5] = q;
    iv.terms[Idx(Component::kC5)] = {
        {st.c5_emb ? "embedding_similarity_label_nmi" : "field_cosine_label_nmi", q}};
  }

  if (st.Want(Component::kC6)) {
    const std::size_t num_labels = st.num_labels;
    const double alpha = st.cfg.pmi_alpha;
    const double a = static_cast<double>(num_labels);
    const std::size_t ls = st.label[s];
    std::vector<double> delta(n, 0.0);
    for (std::uint32_t f : st.sets[s]) {
      double joint = static_cast<double>(st.joint[f * num_labels + ls]);
      double feat = static_cast<double>(st.feature_count[f]);
      double dj = Log2(joint - 1.0 + alpha) - Log2(joint + alpha);
      double df = Log2(feat - 1.0 + a * alpha) - Log2(feat + a * alpha);
      for (std::uint32_t i : st.postings[f]) {
        if (i == s) continue;
        delta[i] += (st.label[i] == ls ? dj : 0.0) - df;
      }
    }
    std::vector<double> k(num_labels);
    for (std::size_t l = 0; l < num_labels; ++l) {
      double count = static_cast<double>(st.label_count[l]) - (l == ls ? 1.0 : 0.0);
      k[l] = Log2(rest_d + 2.0 * a * alpha) - Log2(count + 2.0 * alpha);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == s) continue;
      double m = 0.0;
      if (!st.sets[i].empty()) {
        m = (st.pmi_sum[i] + delta[i]) / static_cast<double>(st.sets[i].size()) +
            k[st.label[i]];
      }
      sum += 1.0 / (1.0 + std::max(0.0, m));
    }
    double q = *base[Component::kC6] - sum / rest_d;
    iv[Component::kC6] = q;
    iv.terms[Idx(Component::kC6)] = {{"label_pmi", q}};
  }

  if (st.Want(Component::kC7) && base[Component::kC7]) {
    std::size_t n_train = st.n_train - (st.is_train[s] ? 1 : 0);
    std::size_t n_eval = st.n_eval - (st.is_eval[s] ? 1 : 0);
    if (n_train > 0 && n_eval > 0) {
      double sum = 0.0;
      for (std::size_t e = 0; e < n; ++e) {
        if (e == s || !st.is_eval[e]) continue;
        double best = st.is_train[s] ? st.c7[e].Without(st.JaccardAt(e, s)) : st.c7[e].best;
        sum += 1.0 - best;
      }
      double q = *base[Component::kC7] - sum / static_cast<double>(n_eval);
      iv[Component::kC7] = q;
      iv.terms[Idx(Component::kC7)] = {{"split_overlap", q}};
    }
  }
  return iv;
}

std::vector<ImpactVector> DqiEngine::AllImpacts() const {
  std::vector<ImpactVector> out(state_->n);
  internal::ParallelFor(out.size(), state_->threads,
                        [&](std::size_t i) { out[i] = Impact(i); });
  return out;
}

ImpactVector DqiEngine::Standalone(std::size_t s) const {
  const State& st = *state_;
  if (s >= st.n) throw Error(ErrorCode::kUnknownId, "sample index out of range");
  ImpactVector iv;
  if (st.Want(Component::kC1)) {
    iv[Component::kC1] = st.length[s] > 0 ? static_cast<double>(st.sets[s].size()) /
                                                static_cast<double>(st.length[s])
                                          : 0.0;
  }
  if (st.Want(Component::kC3)) iv[Component::kC3] = 1.0 - st.c3[s].best;
  if (st.c5_defined && st.c5_emb) {
    iv[Component::kC5] = 1.0 - std::clamp(st.c5_top[s].best, 0.0, 1.0);
  }
  if (st.Want(Component::kC6)) {
    iv[Component::kC6] = 1.0 / (1.0 + std::max(0.0, st.Pmi6(s)));
  }
  if (st.Want(Component::kC7) && st.n_train > 0 && st.is_eval[s]) {
    iv[Component::kC7] = 1.0 - st.c7[s].best;
  }
  return iv;
}

std::optional<DqiEngine::Neighbor> DqiEngine::NearestByJaccard(std::size_t i) const {
  const State& st = *state_;
  if (st.Want(Component::kC3)) {
    if (st.c3[i].arg == kNone) return std::nullopt;
    return Neighbor{st.c3[i].arg, st.c3[i].best};
  }
  std::optional<Neighbor> best;
  for (std::size_t j = 0; j < st.n; ++j) {
    if (j == i) continue;
    double v = st.JaccardAt(i, j);
    if (!best || v > best->similarity) best = Neighbor{j, v};
  }
  return best;
}

std::optional<DqiEngine::Neighbor> DqiEngine::NearestTrainByJaccard(std::size_t i) const {
  const State& st = *state_;
  if (!st.Want(Component::kC7) || !st.is_eval[i] || st.c7[i].arg == kNone) {
    return std::nullopt;
  }
  return Neighbor{st.c7[i].arg, st.c7[i].best};
}

std::optional<DqiEngine::Neighbor> DqiEngine::NearestByEmbedding(std::size_t i) const {
  const State& st = *state_;
  if (!st.c5_emb || st.c5_top[i].arg == kNone) return std::nullopt;
  return Neighbor{st.c5_top[i].arg, st.c5_top[i].best};
}

ImpactVector SampleImpact(const Dataset& d, std::string_view id,
                          const EmbeddingMatrix* emb, const DqiConfig& cfg) {
  if (d.size() < 3) {
    throw Error(ErrorCode::kDatasetTooSmall, "leave-one-out needs at least 3 samples");
  }
  auto index = d.Find(id);
  if (!index) throw Error(ErrorCode::kUnknownId, std::string(id));
  DqiEngine engine(d, emb, cfg);
  return engine.Impact(*index);
}

double CompositeDqi(const ImpactVector& iv, const DqiConfig& cfg) {
  double weighted = 0.0;
  double weight_sum = 0.0;
  bool any = false;
  for (Component c : cfg.sort_components) {
    const auto& q = iv[c];
    if (!q) continue;
    any = true;
    double w = cfg.weights[Idx(c)];
    weighted += w * *q;
    weight_sum += w;
  }
  if (!any) {
    throw Error(ErrorCode::kNoDefinedComponents,
                "no sort component is defined for this sample");
  }
  if (weight_sum <= 0.0) return 0.0;
  return weighted / weight_sum;
}

Color ColorForPercentile(double percentile, const DqiConfig& cfg) {
  if (percentile < cfg.red_below) return Color::kRed;
  if (percentile >= cfg.green_at_or_above) return Color::kGreen;
  return Color::kYellow;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

using internal::Json;

constexpr std::string_view kDraftPlaceholder = "__draft__";

std::string_view ComponentTitle(Component c) {
  switch (c) {
    case Component::kC1: return "vocabulary";
    case Component::kC2: return "frequency";
    case Component::kC3: return "inter-sample overlap";
    case Component::kC4: return "intra-sample overlap";
    case Component::kC5: return "similarity";
    case Component::kC6: return "label leakage";
    case Component::kC7: return "split leakage";
  }
  return "";
}

Color ParseColor(std::string_view name) {
  if (name == "red") return Color::kRed;
  if (name == "green") return Color::kGreen;
  if (name == "yellow") return Color::kYellow;
  throw Error(ErrorCode::kInvalidConfig, "unknown color " + std::string(name));
}

std::string FeedbackText(Component c, Color color, double percentile) {
  std::string text(ComponentTitle(c));
  text += ": ";
  auto pct = static_cast<int>(std::lround(percentile * 100.0));
  switch (color) {
    case Color::kRed:
      text += "adds less than most existing samples (percentile " +
              std::to_string(pct) + "); consider revising";
      break;
    case Color::kYellow:
      text += "comparable to existing samples (percentile " + std::to_string(pct) + ")";
      break;
    case Color::kGreen:
      text += "adds more than most existing samples (percentile " +
              std::to_string(pct) + ")";
      break;
  }
  return text;
}

std::string JoinTokens(const std::vector<std::string>& tokens, std::size_t limit) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size() && i < limit; ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::vector<std::string> SharedFieldTokens(const PreparedSample& s) {
  std::set<std::string> shared;
  for (std::size_t a = 0; a < s.fields.size(); ++a) {
    TokenSet sa = ToSet(s.fields[a]);
    for (std::size_t b = a + 1; b < s.fields.size(); ++b) {
      for (const auto& t : ToSet(s.fields[b])) {
        if (std::binary_search(sa.begin(), sa.end(), t)) shared.insert(t);
      }
    }
  }
  return {shared.begin(), shared.end()};
}

struct ReportContext {
  const Dataset& d;
  std::size_t draft;
  const DqiEngine& engine;
  const DqiConfig& cfg;
  PreparedSample draft_tokens;
};

std::vector<Recommendation> Recommend(Component c, const ReportContext& ctx) {
  const Dataset& d = ctx.d;
  const PreparedSample& p = ctx.draft_tokens;
  std::vector<Recommendation> out;
  switch (c) {
    case Component::kC1: {
      double mean = 0.0;
      for (const auto& s : d.samples()) {
        for (const auto& [name, text] : s.fields) {
          mean += static_cast<double>(Tokenize(text).size());
        }
      }
      mean /= static_cast<double>(d.size());
      auto len = static_cast<double>(p.all.size());
      if (len < 0.5 * mean || len > 2.0 * mean) {
        out.push_back({"length_outlier", std::to_string(p.all.size()),
                       "typical length is about " +
                           std::to_string(static_cast<long>(std::lround(mean))) +
                           " tokens"});
      }
      std::map<std::string, std::size_t> global;
      for (const auto& s : d.samples()) {
        for (const auto& [name, text] : s.fields) {
          for (auto& t : Tokenize(text)) ++global[t];
        }
      }
      std::string best;
      std::size_t best_count = 0;
      for (const auto& t : p.set) {
        auto count = global[t];
        if (count > best_count) {
          best = t;
          best_count = count;
        }
      }
      if (!best.empty()) {
        out.push_back({"common_token", best, "replace with less frequent vocabulary"});
      }
      break;
    }
    case Component::kC2: {
      std::map<std::string, std::size_t> global;
      int order = std::min(2, ctx.cfg.ngram_max);
      for (const auto& s : d.samples()) {
        for (const auto& [name, text] : s.fields) {
          for (auto& k : NgramKeys(Tokenize(text), order)) ++global[k];
        }
      }
      std::string best;
      std::size_t best_count = 0;
      for (const auto& field : p.fields) {
        for (auto& k : NgramKeys(field, order)) {
          if (global[k] > best_count) {
            best = k;
            best_count = global[k];
          }
        }
      }
      if (!best.empty()) {
        std::replace(best.begin(), best.end(), '\x1f', ' ');
        out.push_back({"frequent_ngram", best, "rephrase this common phrase"});
      }
      break;
    }
    case Component::kC3: {
      if (auto nb = ctx.engine.NearestByJaccard(ctx.draft)) {
        out.push_back({"near_duplicate", d[nb->index].id,
                       "token overlap " + std::to_string(nb->similarity) +
                           " with an existing sample"});
      }
      break;
    }
    case Component::kC4: {
      auto shared = SharedFieldTokens(p);
      if (!shared.empty()) {
        out.push_back({"field_overlap", JoinTokens(shared, 8),
                       "fields repeat each other's words"});
      }
      break;
    }
    case Component::kC5: {
      if (ctx.engine.uses_embeddings()) {
        if (auto nb = ctx.engine.NearestByEmbedding(ctx.draft)) {
          out.push_back({"semantic_neighbor", d[nb->index].id,
                         "embedding cosine " + std::to_string(nb->similarity)});
        }
      } else {
        auto shared = SharedFieldTokens(p);
        if (!shared.empty()) {
          out.push_back({"field_similarity", JoinTokens(shared, 8),
                         "fields are lexically similar"});
        }
      }
      break;
    }
    case Component::kC6: {
      PmiTable table = LabelPmi(d, Granularity::kUnigram, ctx.cfg.pmi_alpha);
      const std::string& label = d[ctx.draft].label;
      std::string best;
      double best_pmi = 0.0;
      for (const auto& t : p.set) {
        double v = table.Pmi(t, label);
        if (v > best_pmi) {
          best = t;
          best_pmi = v;
        }
      }
      if (!best.empty()) {
        out.push_back({"giveaway_token", best,
                       "strongly associated with label " + label});
      }
      break;
    }
    case Component::kC7: {
      if (auto nb = ctx.engine.NearestTrainByJaccard(ctx.draft)) {
        out.push_back({"split_leakage", d[nb->index].id,
                       "overlaps a train-split sample"});
      }
      break;
    }
  }
  return out;
}

}  // namespace

const ComponentFeedback* DqiReport::Find(Component c) const {
  for (const auto& f : components) {
    if (f.component == c) return &f;
  }
  return nullptr;
}

std::string DqiReport::ToJson(bool term_level) const {
  Json j;
  j["dataset_size_at_eval"] = dataset_size_at_eval;
  j["composite"] = composite ? Json(*composite) : Json(nullptr);
  Json comps = Json::array();
  for (const auto& f : components) {
    Json c;
    c["component"] = ComponentName(f.component);
    c["score"] = f.score;
    c["percentile"] = f.percentile;
    c["dataset_value"] = f.dataset_value;
    c["color"] = ColorName(f.color);
    c["feedback"] = f.feedback;
    Json recs = Json::array();
    for (const auto& r : f.recommendations) {
      recs.push_back({{"kind", r.kind}, {"target", r.target}, {"detail", r.detail}});
    }
    c["recommendations"] = std::move(recs);
    if (term_level) {
      Json terms = Json::object();
      for (const auto& [name, v] : f.terms) terms[name] = v;
      c["terms"] = std::move(terms);
    }
    comps.push_back(std::move(c));
  }
  j["components"] = std::move(comps);
  return internal::Dump(j);
}

DqiReport DqiReport::FromJson(std::string_view json) {
  DqiReport r;
  try {
    Json j = Json::parse(json);
    r.dataset_size_at_eval = j.at("dataset_size_at_eval").get<std::size_t>();
    if (!j.at("composite").is_null()) r.composite = j.at("composite").get<double>();
    for (const auto& c : j.at("components")) {
      ComponentFeedback f;
      auto comp = ParseComponent(c.at("component").get<std::string>());
      if (!comp) throw Error(ErrorCode::kInvalidConfig, "unknown component");
      f.component = *comp;
      f.score = c.at("score").get<double>();
      f.percentile = c.at("percentile").get<double>();
      f.dataset_value = c.at("dataset_value").get<double>();
      f.color = ParseColor(c.at("color").get<std::string>());
      f.feedback = c.at("feedback").get<std::string>();
      for (const auto& rec : c.at("recommendations")) {
        f.recommendations.push_back({rec.at("kind").get<std::string>(),
                                     rec.at("target").get<std::string>(),
                                     rec.at("detail").get<std::string>()});
      }
      if (auto it = c.find("terms"); it != c.end()) {
        for (const auto& [name, v] : it->items()) f.terms.emplace_back(name, v.get<double>());
      }
      r.components.push_back(std::move(f));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("bad report: ") + e.what());
  }
  return r;
}

DqiReport QualityReport(const Dataset& state, const EmbeddingMatrix* emb,
                        const Sample& draft, const DqiConfig& cfg) {
  if (state.size() < 2) {
    throw Error(ErrorCode::kEmptyState, "need at least 2 samples to compare against");
  }
  Sample probe = draft;
  if (probe.id.empty() || state.Find(probe.id)) {
    std::string id(kDraftPlaceholder);
    for (int k = 1; state.Find(id); ++k) id = std::string(kDraftPlaceholder) + std::to_string(k);
    probe.id = id;
  }
  CheckSampleAgainstSchema(probe, state.schema());
  Dataset with = state.With(probe);
  std::size_t draft_index = *with.Find(probe.id);
  DqiEngine engine(with, emb, cfg);
  DqiVector base = engine.Scores();
  std::vector<ImpactVector> impacts = engine.AllImpacts();

  ReportContext ctx{with, draft_index, engine, cfg, {}};
  {
    Dataset single = Dataset(state.schema(), {probe});
    ctx.draft_tokens = Prepare(single)[0];
  }

  DqiReport report;
  report.dataset_size_at_eval = with.size();
  const ImpactVector& mine = impacts[draft_index];
  for (Component c : kAllComponents) {
    if (!base[c] || !mine[c]) continue;
    std::size_t below = 0;
    std::size_t others = 0;
    for (std::size_t i = 0; i < impacts.size(); ++i) {
      if (i == draft_index || !impacts[i][c]) continue;
      ++others;
      below += *impacts[i][c] < *mine[c];
    }
    ComponentFeedback f;
    f.component = c;
    f.score = *mine[c];
    f.percentile = others ? static_cast<double>(below) / static_cast<double>(others) : 0.5;
    f.dataset_value = *base[c];
    f.color = ColorForPercentile(f.percentile, cfg);
    f.feedback = FeedbackText(c, f.color, f.percentile);
    if (f.color == Color::kRed) f.recommendations = Recommend(c, ctx);
    f.terms = mine.terms[Idx(c)];
    report.components.push_back(std::move(f));
  }
  try {
    report.composite = CompositeDqi(mine, cfg);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNoDefinedComponents) throw;
  }
  return report;
}

}  // namespace dqsel
