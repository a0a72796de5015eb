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

#include "dqsel/aflite.h"

#include <algorithm>
#include <set>

#include "dqsel/error.h"
#include "dqsel/rng.h"
#include "json_util.h"
#include "parallel.h"

namespace dqsel {

void EnsembleConfig::Validate(std::size_t num_samples) const {
  if (m < 1) throw Error(ErrorCode::kInvalidConfig, "m must be >= 1");
  if (t < 1) throw Error(ErrorCode::kInvalidConfig, "t must be >= 1");
  if (t >= num_samples) {
    throw Error(ErrorCode::kTrainTooLarge, "t=" + std::to_string(t) +
                                               " must be < |S|=" +
                                               std::to_string(num_samples));
  }
  probe.Validate();
}

PredictabilityLedger::PredictabilityLedger(std::vector<std::string> ids)
    : ids_(std::move(ids)),
      evaluations_(ids_.size(), 0),
      correct_(ids_.size(), 0) {
  index_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) index_.emplace(ids_[i], i);
}

std::optional<std::size_t> PredictabilityLedger::Find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<double> PredictabilityLedger::PredictabilityAt(std::size_t i) const {
  if (evaluations_[i] == 0) return std::nullopt;
  return static_cast<double>(correct_[i]) / static_cast<double>(evaluations_[i]);
}

void PredictabilityLedger::Add(std::size_t i, std::uint32_t evaluations,
                               std::uint32_t correct) {
  if (correct_[i] + correct > evaluations_[i] + evaluations) {
    throw Error(ErrorCode::kInvariantViolation, "C > E for " + ids_[i]);
  }
  evaluations_[i] += evaluations;
  correct_[i] += correct;
}

std::uint64_t PredictabilityLedger::TotalEvaluations() const {
  std::uint64_t total = 0;
  for (auto e : evaluations_) total += e;
  return total;
}

std::string PredictabilityLedger::ToJson() const {
  internal::Json j = internal::Json::object();
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    j[ids_[i]] = {{"E", evaluations_[i]}, {"C", correct_[i]}};
  }
  return internal::Dump(j);
}

std::optional<double> Predictability(const PredictabilityLedger& ledger,
                                     std::string_view id) {
  auto i = ledger.Find(id);
  if (!i) throw Error(ErrorCode::kUnknownId, std::string(id));
  return ledger.PredictabilityAt(*i);
}

std::uint64_t MemberSeed(std::uint64_t seed, int member) {
  return DeriveSeed(seed, static_cast<std::uint64_t>(member));
}

MemberOutcome RunMember(const EnsembleInput& input, const EnsembleConfig& cfg,
                        int member) {
  const FeatureMatrix& x = *input.features;
  std::size_t n = x.rows();
  MemberOutcome out;
  out.member = member;

  std::uint64_t seed = MemberSeed(cfg.seed, member);
  Rng rng(seed);
  out.train = rng.SampleWithoutReplacement(n, cfg.t);

  std::vector<bool> in_train(n, false);
  for (std::size_t i : out.train) in_train[i] = true;
  for (std::size_t i = 0; i < n; ++i) {
    if (!in_train[i]) out.held_out.push_back(i);
  }

  std::vector<int> train_labels;
  train_labels.reserve(out.train.size());
  std::set<int> classes;
  for (std::size_t i : out.train) {
    train_labels.push_back(input.labels[i]);
    classes.insert(input.labels[i]);
  }
  if (classes.size() < 2) {
    out.skipped = true;
    return out;
  }

  FeatureMatrix train_x = x.Select(out.train);
  FeatureMatrix eval_x = x.Select(out.held_out);
  std::vector<std::string> label_order(input.label_order.begin(),
                                       input.label_order.end());
  TrainConfig probe = cfg.probe;
  probe.seed = seed;

  out.correct.assign(out.held_out.size(), 0);
  // Both probes share the member's train partition.
  for (ModelKind kind : {ModelKind::kLogReg, ModelKind::kSvm}) {
    LinearModel model = kind == ModelKind::kLogReg
                            ? TrainLogReg(train_x, train_labels, label_order, probe)
                            : TrainSvm(train_x, train_labels, label_order, probe);
    std::vector<int> predicted = Predict(model, eval_x);
    for (std::size_t r = 0; r < out.held_out.size(); ++r) {
      if (predicted[r] == input.labels[out.held_out[r]]) ++out.correct[r];
    }
  }
  return out;
}

PredictabilityLedger Accumulate(std::span<const std::string> ids,
                                std::span<const MemberOutcome> outcomes) {
  PredictabilityLedger ledger(std::vector<std::string>(ids.begin(), ids.end()));
  std::vector<int> skipped;
  for (const auto& outcome : outcomes) {
    if (outcome.skipped) {
      skipped.push_back(outcome.member);
      continue;
    }
    for (std::size_t r = 0; r < outcome.held_out.size(); ++r) {
      ledger.Add(outcome.held_out[r], 2, outcome.correct[r]);
    }
  }
  std::sort(skipped.begin(), skipped.end());
  for (int member : skipped) ledger.MarkSkipped(member);
  return ledger;
}

PredictabilityLedger RunEnsemble(const EnsembleInput& input,
                                 const EnsembleConfig& cfg) {
  if (input.features == nullptr) {
    throw Error(ErrorCode::kInvalidConfig, "ensemble input has no features");
  }
  std::size_t n = input.features->rows();
  if (input.labels.size() != n || input.ids.size() != n) {
    throw Error(ErrorCode::kDimMismatch, "features, labels and ids disagree in length");
  }
  cfg.Validate(n);
  std::set<int> present(input.labels.begin(), input.labels.end());
  if (present.size() < 2) {
    throw Error(ErrorCode::kSingleClassInput, "ensemble input has a single label");
  }

  std::vector<MemberOutcome> outcomes(static_cast<std::size_t>(cfg.m));
  internal::ParallelFor(outcomes.size(), cfg.threads, [&](std::size_t i) {
    outcomes[i] = RunMember(input, cfg, static_cast<int>(i));
  });
  PredictabilityLedger ledger = Accumulate(input.ids, outcomes);

  std::uint64_t expected = 0;
  for (const auto& o : outcomes) {
    if (!o.skipped) expected += 2 * o.held_out.size();
  }
  if (ledger.TotalEvaluations() != expected) {
    throw Error(ErrorCode::kInvariantViolation, "sum E != 2 * sum |V|");
  }
  return ledger;
}

}  // namespace dqsel
