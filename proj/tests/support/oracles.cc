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

#include "oracles.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

#include <unistd.h>

#include "dqsel/textstats.h"

namespace dqsel::testing {

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("dqsel-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

TaskSchema TwoLabelSchema() {
  return TaskSchema{"nli2", {"premise", "hypothesis"}, {"entailment", "contradiction"}};
}

Dataset LeakageFixture() {
  auto make = [](std::string id, std::string p, std::string h, std::string label) {
    return Sample{std::move(id), {{"premise", std::move(p)}, {"hypothesis", std::move(h)}},
                  std::move(label), std::nullopt};
  };
  return Dataset(TwoLabelSchema(),
                 {make("s1", "A dog runs.", "A dog is not sleeping.", "contradiction"),
                  make("s2", "A cat sits.", "The cat is not standing.", "contradiction"),
                  make("s3", "A man walks.", "A man moves fast today.", "entailment"),
                  make("s4", "Two kids play.", "Kids are playing.", "entailment")});
}

Dataset RandomCorpus(Rng& rng, const RandomCorpusOptions& opt) {
  TaskSchema schema;
  schema.name = "random";
  for (std::size_t f = 0; f < opt.fields; ++f) schema.field_names.push_back("f" + std::to_string(f));
  for (std::size_t l = 0; l < opt.labels; ++l) schema.labels.push_back("L" + std::to_string(l));
  std::vector<Sample> samples;
  for (std::size_t i = 0; i < opt.samples; ++i) {
    Sample s;
    s.id = "r" + std::to_string(i);
    for (const auto& name : schema.field_names) {
      std::size_t len = rng.UniformIndex(opt.max_tokens + 1);
      std::string text;
      for (std::size_t k = 0; k < len; ++k) {
        if (k) text += ' ';
        text += "t" + std::to_string(rng.UniformIndex(opt.vocab));
      }
      s.fields[name] = text;
    }
    s.label = schema.labels[rng.UniformIndex(schema.labels.size())];
    if (opt.splits) {
      static const char* kSplits[] = {"train", "train", "dev", "test"};
      if (rng.UniformIndex(5) != 0) s.split = kSplits[rng.UniformIndex(4)];
    }
    samples.push_back(std::move(s));
  }
  return Dataset(schema, std::move(samples));
}

EmbeddingMatrix RandomEmbeddings(Rng& rng, const Dataset& d, std::size_t dim) {
  std::vector<float> values;
  std::vector<std::string> order;
  for (const auto& s : d.samples()) {
    order.push_back(s.id);
    for (std::size_t c = 0; c < dim; ++c) values.push_back(static_cast<float>(rng.Normal()));
  }
  return EmbeddingMatrix(dim, std::move(values), std::move(order));
}

SmallProblem EightPointFixture() {
  SmallProblem p;
  p.x = FeatureMatrix(8, 2, {0.0, 0.1, 0.3, -0.2, -0.4, 0.5, 0.2, 0.9,    //
                             1.6, 1.2, 2.1, 0.8, 1.4, 2.2, 0.7, 1.1});
  p.y = {0, 0, 0, 1, 1, 1, 1, 0};
  p.label_order = {"neg", "pos"};
  for (int i = 0; i < 8; ++i) p.ids.push_back("p" + std::to_string(i));
  return p;
}

BruteLedger BruteForceEnsemble(const FeatureMatrix& x, const std::vector<int>& y,
                               const std::vector<std::string>& label_order, int m,
                               std::size_t t, std::uint64_t seed, const TrainConfig& probe) {
  const std::size_t n = x.rows();
  BruteLedger out{std::vector<std::uint32_t>(n, 0), std::vector<std::uint32_t>(n, 0), {}};
  for (int member = 0; member < m; ++member) {
    std::uint64_t member_seed = DeriveSeed(seed, static_cast<std::uint64_t>(member));
    Rng rng(member_seed);
    std::vector<std::size_t> train = rng.SampleWithoutReplacement(n, t);
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::find(train.begin(), train.end(), i) == train.end()) rest.push_back(i);
    }
    FeatureMatrix tx(train.size(), x.cols());
    std::vector<int> ty;
    for (std::size_t r = 0; r < train.size(); ++r) {
      for (std::size_t c = 0; c < x.cols(); ++c) tx.at(r, c) = x.at(train[r], c);
      ty.push_back(y[train[r]]);
    }
    if (std::all_of(ty.begin(), ty.end(), [&](int v) { return v == ty[0]; })) {
      out.skipped.push_back(member);
      continue;
    }
    TrainConfig cfg = probe;
    cfg.seed = member_seed;
    LinearModel lr = TrainLogReg(tx, ty, label_order, cfg);
    LinearModel svm = TrainSvm(tx, ty, label_order, cfg);
    for (std::size_t i : rest) {
      FeatureMatrix row(1, x.cols());
      for (std::size_t c = 0; c < x.cols(); ++c) row.at(0, c) = x.at(i, c);
      for (const LinearModel* model : {&lr, &svm}) {
        // Argmax by hand, lowest index on ties.
        int best = 0;
        double best_score = -INFINITY;
        for (std::size_t l = 0; l < label_order.size(); ++l) {
          double score = model->weights[l * (x.cols() + 1) + x.cols()];
          for (std::size_t c = 0; c < x.cols(); ++c) {
            score += model->weights[l * (x.cols() + 1) + c] * row.at(0, c);
          }
          if (score > best_score) {
            best_score = score;
            best = static_cast<int>(l);
          }
        }
        out.e[i] += 1;
        if (best == y[i]) out.c[i] += 1;
      }
    }
  }
  return out;
}

double LogRegGradientError(const std::vector<double>& w, const FeatureMatrix& x,
                           const std::vector<int>& y, std::size_t labels, double l2,
                           double step) {
  std::vector<double> analytic = LogRegGradient(w, x, y, labels, l2);
  double worst = 0.0;
  std::vector<double> probe = w;
  for (std::size_t k = 0; k < w.size(); ++k) {
    probe[k] = w[k] + step;
    double up = LogRegLoss(probe, x, y, labels, l2);
    probe[k] = w[k] - step;
    double down = LogRegLoss(probe, x, y, labels, l2);
    probe[k] = w[k];
    double numeric = (up - down) / (2.0 * step);
    double scale = std::max({std::abs(numeric), std::abs(analytic[k]), 1e-6});
    worst = std::max(worst, std::abs(numeric - analytic[k]) / scale);
  }
  return worst;
}

double NaiveC1(const std::vector<std::vector<std::uint32_t>>& tokens,
               const std::vector<char>& present) {
  std::set<std::uint32_t> vocab;
  std::vector<double> lengths;
  double total = 0.0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!present[i]) continue;
    vocab.insert(tokens[i].begin(), tokens[i].end());
    lengths.push_back(static_cast<double>(tokens[i].size()));
    total += static_cast<double>(tokens[i].size());
  }
  double richness = total > 0 ? static_cast<double>(vocab.size()) / total : 0.0;
  double mean = total / static_cast<double>(lengths.size());
  double var = 0.0;
  for (double l : lengths) var += (l - mean) * (l - mean);
  var /= static_cast<double>(lengths.size());
  double dispersion = mean > 0 ? std::min(1.0, std::sqrt(var) / mean) : 0.0;
  return richness + dispersion > 0 ? 2 * richness * dispersion / (richness + dispersion) : 0.0;
}

std::vector<OracleIteration> StraightLinePrune(const Dataset& d, const EmbeddingMatrix& emb,
                                               const PruneConfig& cfg) {
  // Token ids over the whole corpus, fields in schema order.
  std::unordered_map<std::string, std::uint32_t> ids;
  std::vector<std::vector<std::uint32_t>> tokens(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (const auto& f : d.schema().field_names) {
      for (const auto& t : Tokenize(d[i].fields.at(f))) {
        auto it = ids.emplace(t, static_cast<std::uint32_t>(ids.size())).first;
        tokens[i].push_back(it->second);
      }
    }
  }
  std::vector<std::size_t> alive(d.size());
  std::iota(alive.begin(), alive.end(), std::size_t{0});
  const std::size_t target = cfg.n.value_or(std::max<std::size_t>(1, d.size() / 10));
  std::vector<OracleIteration> out;
  for (std::size_t iteration = 0; alive.size() > target && alive.size() >= 3; ++iteration) {
    const std::size_t n = alive.size();
    FeatureMatrix x(n, emb.dim());
    std::vector<int> y(n);
    for (std::size_t r = 0; r < n; ++r) {
      auto row = emb.Row(*emb.Find(d[alive[r]].id));
      for (std::size_t c = 0; c < emb.dim(); ++c) x.at(r, c) = row[c];
      y[r] = static_cast<int>(*d.schema().LabelIndex(d[alive[r]].label));
    }
    std::size_t t = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::floor(cfg.t * static_cast<double>(n))), 1, n - 1);
    BruteLedger ledger = BruteForceEnsemble(x, y, d.schema().labels, cfg.m, t,
                                            PruneIterationSeed(cfg.seed, iteration), cfg.probe);
    std::vector<std::size_t> shortlist;
    for (std::size_t r = 0; r < n; ++r) {
      if (ledger.e[r] > 0 &&
          static_cast<double>(ledger.c[r]) / static_cast<double>(ledger.e[r]) > cfg.tau) {
        shortlist.push_back(r);
      }
    }
    if (shortlist.empty()) break;
    std::vector<std::vector<std::uint32_t>> current(n);
    for (std::size_t r = 0; r < n; ++r) current[r] = tokens[alive[r]];
    std::vector<char> present(n, 1);
    const double base = NaiveC1(current, present);
    std::vector<std::pair<double, std::string>> ranked;
    for (std::size_t r : shortlist) {
      present[r] = 0;
      ranked.emplace_back(base - NaiveC1(current, present), d[alive[r]].id);
      present[r] = 1;
    }
    // Values within 1e-12 count as tied and fall back to id order.
    std::sort(ranked.begin(), ranked.end());
    for (std::size_t lo = 0; lo < ranked.size();) {
      std::size_t hi = lo + 1;
      while (hi < ranked.size() && ranked[hi].first - ranked[hi - 1].first <= 1e-12) ++hi;
      std::sort(ranked.begin() + static_cast<std::ptrdiff_t>(lo),
                ranked.begin() + static_cast<std::ptrdiff_t>(hi),
                [](const auto& a, const auto& b) { return a.second < b.second; });
      lo = hi;
    }
    OracleIteration it;
    it.size_before = n;
    for (std::size_t r : shortlist) it.shortlist.push_back(d[alive[r]].id);
    std::size_t count = std::min(cfg.k, ranked.size());
    std::set<std::string> gone;
    for (std::size_t j = 0; j < count; ++j) {
      it.deleted.push_back(ranked[j].second);
      it.deleted_composite.push_back(ranked[j].first);
      gone.insert(ranked[j].second);
    }
    if (count < ranked.size()) it.next_composite = ranked[count].first;
    std::vector<std::size_t> next;
    for (std::size_t i : alive) {
      if (!gone.contains(d[i].id)) next.push_back(i);
    }
    alive = std::move(next);
    out.push_back(std::move(it));
    if (shortlist.size() < cfg.k) break;
  }
  return out;
}

PruneCase RandomPruneCase(Rng& rng) {
  RandomCorpusOptions opt;
  opt.samples = 20 + rng.UniformIndex(60);
  opt.labels = 2 + rng.UniformIndex(2);
  opt.vocab = 10 + rng.UniformIndex(40);
  Dataset data = RandomCorpus(rng, opt);
  const std::size_t dim = 2 + rng.UniformIndex(4);
  const double signal = rng.UniformReal() * 3.0;
  std::vector<float> values;
  std::vector<std::string> order;
  for (const auto& s : data.samples()) {
    order.push_back(s.id);
    double label = static_cast<double>(*data.schema().LabelIndex(s.label));
    for (std::size_t c = 0; c < dim; ++c) {
      values.push_back(static_cast<float>(rng.Normal() + (c == 0 ? signal * label : 0.0)));
    }
  }
  PruneCase out{data, EmbeddingMatrix(dim, std::move(values), std::move(order)), {}, {}};
  for (std::size_t i = rng.UniformIndex(4); i > 0; --i) {
    out.burned.push_back(data[rng.UniformIndex(data.size())].id);
  }
  out.burned.push_back("not-in-dataset");
  PruneConfig& cfg = out.cfg;
  cfg.m = 1 + static_cast<int>(rng.UniformIndex(6));
  cfg.t = 0.2 + 0.6 * rng.UniformReal();
  cfg.tau = 0.3 + 0.65 * rng.UniformReal();
  cfg.k = 1 + rng.UniformIndex(20);
  if (rng.UniformIndex(2)) cfg.n = 1 + rng.UniformIndex(15);
  cfg.seed = rng.Next();
  cfg.probe.epochs = 15;
  cfg.threads = 1 + rng.UniformIndex(2);
  cfg.coarse_enabled = rng.UniformIndex(3) == 0;
  cfg.b = 5 + rng.UniformIndex(30);
  cfg.epsilon = 0.01 * rng.UniformReal();
  cfg.dqi.sort_components.clear();
  for (Component c : kAllComponents) {
    if (rng.UniformIndex(3) == 0) cfg.dqi.sort_components.push_back(c);
  }
  // C7 is undefined without splits.
  if (cfg.dqi.sort_components.empty() ||
      cfg.dqi.sort_components == std::vector<Component>{Component::kC7}) {
    cfg.dqi.sort_components.insert(cfg.dqi.sort_components.begin(), Component::kC1);
  }
  cfg.dqi.standalone_scores = rng.UniformIndex(4) == 0;
  // Standalone ranking needs a per-sample term; C2 and C4 have none.
  const auto& sc = cfg.dqi.sort_components;
  bool has_term = std::any_of(sc.begin(), sc.end(), [](Component c) {
    return c == Component::kC1 || c == Component::kC3 || c == Component::kC5 ||
           c == Component::kC6;
  });
  if (cfg.dqi.standalone_scores && !has_term) {
    cfg.dqi.sort_components.insert(cfg.dqi.sort_components.begin(), Component::kC1);
  }
  return out;
}

std::vector<std::string> TraceViolations(const PruneResult& result, const PruneConfig& cfg,
                                         const std::set<std::string>& burned) {
  std::vector<std::string> out;
  const PruneTrace& t = result.trace;
  auto fail = [&](std::string msg) { out.push_back(std::move(msg)); };
  static const std::set<std::string> kReasons = {"target_reached", "too_small", "single_label",
                                                  "empty_shortlist", "shortlist_below_k"};
  if (!kReasons.contains(t.stop_reason)) fail("unknown stop reason " + t.stop_reason);
  if (t.input_size - t.burned_removed < t.start_size) fail("start larger than pool");
  std::size_t size = t.start_size;
  for (std::size_t j = 0; j < t.iterations.size(); ++j) {
    const PruneIteration& it = t.iterations[j];
    std::string where = "iteration " + std::to_string(j) + ": ";
    if (it.iteration != j) fail(where + "index out of sequence");
    if (it.size_before != size) fail(where + "size_before does not chain");
    if (it.shortlist_size == 0) fail(where + "empty shortlist recorded");
    if (it.deleted_ids.size() != std::min(cfg.k, it.shortlist_size)) {
      fail(where + "deleted count != min(k, shortlist)");
    }
    if (it.deleted_p.size() != it.deleted_ids.size()) fail(where + "deleted_p length");
    for (double p : it.deleted_p) {
      if (!(p > cfg.tau)) fail(where + "deleted id with P <= tau");
    }
    for (const auto& id : it.deleted_ids) {
      if (burned.contains(id)) fail(where + "burned id deleted: " + id);
      if (result.kept.Find(id)) fail(where + "deleted id kept: " + id);
    }
    if (it.deleted_ids.empty()) fail(where + "no deletion");
    size -= std::min(size, it.deleted_ids.size());
  }
  if (size != t.final_size) fail("final_size does not match deletions");
  if (result.kept.size() != t.final_size) fail("kept size != final_size");
  for (const auto& s : result.kept.samples()) {
    if (burned.contains(s.id)) fail("burned id kept: " + s.id);
  }
  if (t.stop_reason == "target_reached" && t.final_size > t.target) fail("target not reached");
  return out;
}

double PlantedFirstFraction(const std::vector<std::string>& deletion_order,
                            const std::set<std::string>& planted,
                            const std::set<std::string>& eligible) {
  std::size_t total = 0;
  for (const auto& id : planted) {
    if (eligible.empty() || eligible.contains(id)) ++total;
  }
  if (total == 0) return 0.0;
  std::size_t before = 0;
  for (const auto& id : deletion_order) {
    if (!planted.contains(id)) break;
    ++before;
  }
  return static_cast<double>(before) / static_cast<double>(total);
}

}  // namespace dqsel::testing
