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

#include "dqsel/pruner.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "dqsel/aflite.h"
#include "dqsel/error.h"
#include "dqsel/rng.h"
#include "json_util.h"
#include "parallel.h"

namespace dqsel {

using internal::Json;

namespace {

constexpr std::uint64_t kCoarseStream = 0xc0a75e;
constexpr std::uint64_t kIterationStream = 0x17e7;

void RejectUnknownKeys(const Json& j, std::initializer_list<std::string_view> keys,
                       std::string_view where) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw Error(ErrorCode::kInvalidConfig,
                  "unknown key '" + key + "' in " + std::string(where));
    }
  }
}

std::string UnitsName(CoarseUnits u) {
  return u == CoarseUnits::kPercent ? "percent" : "samples";
}

Json StepToJson(const CoarseStep& s) {
  return {{"a", s.a}, {"size", s.size}, {"accuracy", s.accuracy}, {"improved", s.improved}};
}

}  // namespace

std::uint64_t CoarseStepSeed(std::uint64_t seed, std::size_t step) {
  return DeriveSeed(seed, kCoarseStream + step);
}

std::uint64_t PruneIterationSeed(std::uint64_t seed, std::size_t iteration) {
  return DeriveSeed(seed, kIterationStream + iteration);
}

void PruneConfig::Validate() const {
  auto bad = [](const std::string& msg) { throw Error(ErrorCode::kInvalidConfig, msg); };
  if (b == 0) bad("b must be > 0");
  if (!(epsilon >= 0.0)) bad("epsilon must be >= 0");
  if (m < 1) bad("m must be >= 1");
  if (!(t > 0.0 && t < 1.0)) bad("t must be in (0, 1)");
  if (!(tau > 0.0 && tau <= 1.0)) bad("tau must be in (0, 1]");
  if (n && *n < 1) bad("n must be >= 1");
  if (k < 1) bad("k must be >= 1");
  if (coarse_units == CoarseUnits::kPercent && b > 100) bad("b above 100 percent");
  probe.Validate();
  dqi.Validate();
}

PruneConfig ParsePruneConfig(std::string_view json) {
  Json j;
  try {
    j = Json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("prune config: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kInvalidConfig, "prune config must be an object");
  RejectUnknownKeys(j, {"b", "epsilon", "m", "t", "tau", "n", "k", "seed", "threads",
                        "coarse", "probe", "dqi"},
                    "prune config");
  PruneConfig cfg;
  using internal::GetOr;
  cfg.b = GetOr<std::size_t>(j, "b", cfg.b);
  cfg.epsilon = GetOr<double>(j, "epsilon", cfg.epsilon);
  cfg.m = GetOr<int>(j, "m", cfg.m);
  cfg.t = GetOr<double>(j, "t", cfg.t);
  cfg.tau = GetOr<double>(j, "tau", cfg.tau);
  if (j.contains("n") && !j["n"].is_null()) cfg.n = GetOr<std::size_t>(j, "n", 0);
  cfg.k = GetOr<std::size_t>(j, "k", cfg.k);
  cfg.seed = GetOr<std::uint64_t>(j, "seed", cfg.seed);
  cfg.threads = GetOr<std::size_t>(j, "threads", cfg.threads);
  if (auto it = j.find("coarse"); it != j.end()) {
    if (!it->is_object()) throw Error(ErrorCode::kInvalidConfig, "coarse must be an object");
    RejectUnknownKeys(*it, {"enabled", "units"}, "coarse");
    cfg.coarse_enabled = GetOr<bool>(*it, "enabled", cfg.coarse_enabled);
    auto units = GetOr<std::string>(*it, "units", "samples");
    if (units == "samples") cfg.coarse_units = CoarseUnits::kSamples;
    else if (units == "percent") cfg.coarse_units = CoarseUnits::kPercent;
    else throw Error(ErrorCode::kInvalidConfig, "coarse.units must be samples or percent");
  }
  if (auto it = j.find("probe"); it != j.end()) {
    if (!it->is_object()) throw Error(ErrorCode::kInvalidConfig, "probe must be an object");
    RejectUnknownKeys(*it, {"learning_rate", "epochs", "l2", "seed"}, "probe");
    cfg.probe.learning_rate = GetOr<double>(*it, "learning_rate", cfg.probe.learning_rate);
    cfg.probe.epochs = GetOr<int>(*it, "epochs", cfg.probe.epochs);
    cfg.probe.l2 = GetOr<double>(*it, "l2", cfg.probe.l2);
    cfg.probe.seed = GetOr<std::uint64_t>(*it, "seed", cfg.probe.seed);
  }
  if (auto it = j.find("dqi"); it != j.end()) cfg.dqi = ParseDqiConfig(it->dump());
  cfg.Validate();
  return cfg;
}

PruneConfig LoadPruneConfig(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kInvalidConfig, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return ParsePruneConfig(buffer.str());
}

std::string PruneConfigToJson(const PruneConfig& cfg) {
  Json j;
  j["b"] = cfg.b;
  j["epsilon"] = cfg.epsilon;
  j["m"] = cfg.m;
  j["t"] = cfg.t;
  j["tau"] = cfg.tau;
  j["n"] = cfg.n ? Json(*cfg.n) : Json(nullptr);
  j["k"] = cfg.k;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["coarse"] = {{"enabled", cfg.coarse_enabled}, {"units", UnitsName(cfg.coarse_units)}};
  j["probe"] = {{"learning_rate", cfg.probe.learning_rate},
                {"epochs", cfg.probe.epochs},
                {"l2", cfg.probe.l2},
                {"seed", cfg.probe.seed}};
  j["dqi"] = Json::parse(DqiConfigToJson(cfg.dqi));
  return j.dump(2);
}

CoarseResult CoarseSelect(std::size_t population, const PruneConfig& cfg,
                          const CoarseProbe& probe) {
  if (!cfg.coarse_enabled) throw Error(ErrorCode::kCoarseDisabled, "coarse selection is off");
  if (population < 2) {
    throw Error(ErrorCode::kDatasetTooSmall, "coarse selection needs at least 2 samples");
  }
  CoarseResult result;
  std::optional<double> previous;
  for (std::size_t a = cfg.b, step = 0;; a += cfg.b, ++step) {
    std::size_t size = population;
    if (cfg.coarse_units == CoarseUnits::kSamples) {
      size = std::min(a, population);
    } else if (a < 100) {
      size = std::max<std::size_t>(1, a * population / 100);
    }
    std::uint64_t step_seed = CoarseStepSeed(cfg.seed, step);
    std::vector<std::size_t> subset;
    if (size >= population) {
      subset.resize(population);
      std::iota(subset.begin(), subset.end(), std::size_t{0});
    } else {
      Rng rng(step_seed);
      subset = rng.SampleWithoutReplacement(population, size);
      std::sort(subset.begin(), subset.end());
    }
    double accuracy = probe(subset, step_seed);
    bool improved = !previous || accuracy > *previous + cfg.epsilon;
    result.steps.push_back({a, size, accuracy, improved});
    if (!improved) break;
    previous = accuracy;
    result.selected = std::move(subset);
    if (size >= population) break;
  }
  return result;
}

double SplitHalfAccuracy(const Dataset& d, const FeatureMatrix& features,
                         std::span<const std::size_t> subset,
                         const TrainConfig& probe, std::uint64_t seed) {
  std::vector<std::size_t> order(subset.begin(), subset.end());
  Rng rng(DeriveSeed(seed, 1));
  rng.Shuffle(order);
  std::size_t half = order.size() / 2;
  std::vector<std::size_t> train(order.begin(), order.begin() + half);
  std::vector<std::size_t> test(order.begin() + half, order.end());
  if (train.empty() || test.empty()) return 0.0;
  const auto& labels = d.schema().labels;
  auto label_of = [&](std::size_t i) {
    return static_cast<int>(*d.schema().LabelIndex(d[i].label));
  };
  std::vector<int> y_train;
  std::vector<int> y_test;
  for (auto i : train) y_train.push_back(label_of(i));
  for (auto i : test) y_test.push_back(label_of(i));
  FeatureMatrix x_train = features.Select(train);
  FeatureMatrix x_test = features.Select(test);
  if (std::adjacent_find(y_train.begin(), y_train.end(), std::not_equal_to<>()) ==
      y_train.end()) {
    std::vector<int> constant(y_test.size(), y_train.front());
    return Accuracy(constant, y_test);
  }
  TrainConfig svm_cfg = probe;
  svm_cfg.seed = seed;
  LinearModel lr = TrainLogReg(x_train, y_train, labels, probe);
  LinearModel svm = TrainSvm(x_train, y_train, labels, svm_cfg);
  return 0.5 * (Accuracy(Predict(lr, x_test), y_test) +
                Accuracy(Predict(svm, x_test), y_test));
}

std::string PruneTrace::ToJsonl() const {
  std::string out;
  Json coarse;
  coarse["type"] = "coarse";
  coarse["enabled"] = coarse_enabled;
  Json steps = Json::array();
  for (const auto& s : coarse_steps) steps.push_back(StepToJson(s));
  coarse["steps"] = std::move(steps);
  coarse["input_size"] = input_size;
  coarse["burned_removed"] = burned_removed;
  coarse["start_size"] = start_size;
  coarse["target"] = target;
  out += internal::Dump(coarse) + "\n";
  for (const auto& it : iterations) {
    Json j;
    j["type"] = "iteration";
    j["iteration"] = it.iteration;
    j["size_before"] = it.size_before;
    j["shortlist_size"] = it.shortlist_size;
    j["deleted_ids"] = it.deleted_ids;
    j["deleted_p"] = it.deleted_p;
    j["deleted_composite"] = it.deleted_composite;
    j["min_p"] = it.min_p;
    j["max_p"] = it.max_p;
    j["composite_cutoff"] = it.composite_cutoff;
    j["retained_min_composite"] =
        it.retained_min_composite ? Json(*it.retained_min_composite) : Json(nullptr);
    j["early_stop"] = it.early_stop.empty() ? Json(nullptr) : Json(it.early_stop);
    out += internal::Dump(j) + "\n";
  }
  Json stop;
  stop["type"] = "stop";
  stop["reason"] = stop_reason;
  stop["final_size"] = final_size;
  out += internal::Dump(stop) + "\n";
  return out;
}

PruneTrace PruneTrace::FromJsonl(std::string_view text) {
  PruneTrace trace;
  std::istringstream in{std::string(text)};
  std::string line;
  try {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      Json j = Json::parse(line);
      auto type = j.at("type").get<std::string>();
      if (type == "coarse") {
        trace.coarse_enabled = j.at("enabled").get<bool>();
        for (const auto& s : j.at("steps")) {
          trace.coarse_steps.push_back({s.at("a").get<std::size_t>(),
                                        s.at("size").get<std::size_t>(),
                                        s.at("accuracy").get<double>(),
                                        s.at("improved").get<bool>()});
        }
        trace.input_size = j.at("input_size").get<std::size_t>();
        trace.burned_removed = j.at("burned_removed").get<std::size_t>();
        trace.start_size = j.at("start_size").get<std::size_t>();
        trace.target = j.at("target").get<std::size_t>();
      } else if (type == "iteration") {
        PruneIteration it;
        it.iteration = j.at("iteration").get<std::size_t>();
        it.size_before = j.at("size_before").get<std::size_t>();
        it.shortlist_size = j.at("shortlist_size").get<std::size_t>();
        it.deleted_ids = j.at("deleted_ids").get<std::vector<std::string>>();
        it.deleted_p = j.at("deleted_p").get<std::vector<double>>();
        it.deleted_composite = j.at("deleted_composite").get<std::vector<double>>();
        it.min_p = j.at("min_p").get<double>();
        it.max_p = j.at("max_p").get<double>();
        it.composite_cutoff = j.at("composite_cutoff").get<double>();
        if (!j.at("retained_min_composite").is_null()) {
          it.retained_min_composite = j.at("retained_min_composite").get<double>();
        }
        if (!j.at("early_stop").is_null()) it.early_stop = j.at("early_stop").get<std::string>();
        trace.iterations.push_back(std::move(it));
      } else if (type == "stop") {
        trace.stop_reason = j.at("reason").get<std::string>();
        trace.final_size = j.at("final_size").get<std::size_t>();
      } else {
        throw Error(ErrorCode::kMalformedRecord, "unknown trace record " + type);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedRecord, std::string("trace: ") + e.what());
  }
  return trace;
}

PruneResult Prune(const Dataset& d, const EmbeddingMatrix& emb,
                  std::span<const std::string> burned, const PruneConfig& cfg,
                  const CoarseProbe* probe) {
  cfg.Validate();
  std::unordered_set<std::string> burned_set(burned.begin(), burned.end());
  std::vector<std::size_t> pool_rows;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& id = d[i].id;
    if (burned_set.contains(id)) continue;
    if (!emb.Find(id)) {
      throw Error(ErrorCode::kEmbeddingCoverageGap, "no embedding row for " + id);
    }
    pool_rows.push_back(i);
  }
  Dataset pool = d.Subset(pool_rows);
  if (cfg.n && *cfg.n > pool.size()) {
    throw Error(ErrorCode::kTargetTooLarge,
                "n=" + std::to_string(*cfg.n) + " exceeds " + std::to_string(pool.size()) +
                    " unburned samples");
  }

  PruneTrace trace;
  trace.input_size = d.size();
  trace.burned_removed = d.size() - pool.size();
  trace.coarse_enabled = cfg.coarse_enabled;

  auto row_indices = [&](const Dataset& s) {
    std::vector<std::size_t> rows;
    rows.reserve(s.size());
    for (const auto& sample : s.samples()) rows.push_back(*emb.Find(sample.id));
    return rows;
  };

  Dataset current = pool;
  if (cfg.coarse_enabled) {
    FeatureMatrix pool_features;
    CoarseProbe default_probe;
    if (probe == nullptr) {
      auto rows = row_indices(pool);
      pool_features = FeatureMatrix::FromEmbeddings(emb, rows);
      default_probe = [&](std::span<const std::size_t> subset, std::uint64_t seed) {
        return SplitHalfAccuracy(pool, pool_features, subset, cfg.probe, seed);
      };
    }
    CoarseResult coarse = CoarseSelect(pool.size(), cfg, probe ? *probe : default_probe);
    trace.coarse_steps = coarse.steps;
    current = pool.Subset(coarse.selected);
  }
  trace.start_size = current.size();
  const std::size_t target =
      cfg.n.value_or(std::max<std::size_t>(1, current.size() / 10));
  trace.target = target;

  DqiEngine::ComponentMask mask;
  for (Component c : cfg.dqi.sort_components) mask.set(static_cast<std::size_t>(c));
  std::vector<int> labels;
  std::vector<std::string> ids;
  const std::vector<std::string>& label_order = d.schema().labels;

  for (std::size_t iteration = 0;; ++iteration) {
    if (current.size() <= target) {
      trace.stop_reason = "target_reached";
      break;
    }
    if (current.size() < 3) {
      trace.stop_reason = "too_small";
      break;
    }
    {
      const std::string& first = current[0].label;
      bool mixed = false;
      for (const auto& s : current.samples()) mixed = mixed || s.label != first;
      if (!mixed) {
        trace.stop_reason = "single_label";
        break;
      }
    }
    auto rows = row_indices(current);
    FeatureMatrix features = FeatureMatrix::FromEmbeddings(emb, rows);
    labels.clear();
    ids.clear();
    for (const auto& s : current.samples()) {
      labels.push_back(static_cast<int>(*d.schema().LabelIndex(s.label)));
      ids.push_back(s.id);
    }
    EnsembleConfig ens;
    ens.m = cfg.m;
    ens.t = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::floor(cfg.t * static_cast<double>(current.size()))),
        1, current.size() - 1);
    ens.seed = PruneIterationSeed(cfg.seed, iteration);
    ens.probe = cfg.probe;
    ens.threads = cfg.threads;
    EnsembleInput input{&features, labels, label_order, ids};
    PredictabilityLedger ledger = RunEnsemble(input, ens);

    std::vector<std::size_t> shortlist;
    for (std::size_t i = 0; i < current.size(); ++i) {
      auto p = ledger.PredictabilityAt(i);
      if (p && *p > cfg.tau) shortlist.push_back(i);
    }
    if (shortlist.empty()) {
      trace.stop_reason = "empty_shortlist";
      break;
    }

    DqiEngine engine(current, &emb, cfg.dqi, mask, cfg.threads);
    std::vector<double> composite(shortlist.size());
    internal::ParallelFor(shortlist.size(), cfg.threads, [&](std::size_t j) {
      std::size_t i = shortlist[j];
      ImpactVector iv = cfg.dqi.standalone_scores ? engine.Standalone(i) : engine.Impact(i);
      composite[j] = CompositeDqi(iv, cfg.dqi);
    });
    std::vector<std::size_t> rank(shortlist.size());
    std::iota(rank.begin(), rank.end(), std::size_t{0});
    std::sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
      if (composite[a] != composite[b]) return composite[a] < composite[b];
      return current[shortlist[a]].id < current[shortlist[b]].id;
    });

    PruneIteration record;
    record.iteration = iteration;
    record.size_before = current.size();
    record.shortlist_size = shortlist.size();
    record.min_p = 1.0;
    record.max_p = 0.0;
    for (std::size_t i : shortlist) {
      double p = *ledger.PredictabilityAt(i);
      record.min_p = std::min(record.min_p, p);
      record.max_p = std::max(record.max_p, p);
    }
    const std::size_t count = std::min(cfg.k, shortlist.size());
    std::vector<char> drop(current.size(), 0);
    for (std::size_t r = 0; r < count; ++r) {
      std::size_t i = shortlist[rank[r]];
      drop[i] = 1;
      record.deleted_ids.push_back(current[i].id);
      record.deleted_p.push_back(*ledger.PredictabilityAt(i));
      record.deleted_composite.push_back(composite[rank[r]]);
    }
    record.composite_cutoff = composite[rank[count - 1]];
    if (count < shortlist.size()) record.retained_min_composite = composite[rank[count]];
    if (shortlist.size() < cfg.k) record.early_stop = "shortlist_below_k";

    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < current.size(); ++i) {
      if (!drop[i]) keep.push_back(i);
    }
    current = current.Subset(keep);
    bool stop = !record.early_stop.empty();
    trace.iterations.push_back(std::move(record));
    if (stop) {
      trace.stop_reason = "shortlist_below_k";
      break;
    }
  }
  trace.final_size = current.size();
  return {std::move(current), std::move(trace)};
}

}  // namespace dqsel
