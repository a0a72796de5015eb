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

#ifndef DQSEL_AFLITE_H_
#define DQSEL_AFLITE_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dqsel/linmodels.h"

namespace dqsel {

struct EnsembleConfig {
  int m = 16;            // members
  std::size_t t = 1;     // train partition size per member
  std::uint64_t seed = 0;
  TrainConfig probe;
  std::size_t threads = 0;  // 0: hardware concurrency

  // Throws TrainTooLarge when t >= num_samples, kInvalidConfig otherwise.
  void Validate(std::size_t num_samples) const;
};

// Per-sample evaluation count E and correct count C.
class PredictabilityLedger {
 public:
  PredictabilityLedger() = default;
  explicit PredictabilityLedger(std::vector<std::string> ids);

  const std::vector<std::string>& ids() const { return ids_; }
  std::size_t size() const { return ids_.size(); }

  std::uint32_t evaluations(std::size_t i) const { return evaluations_[i]; }
  std::uint32_t correct(std::size_t i) const { return correct_[i]; }
  std::optional<std::size_t> Find(std::string_view id) const;

  // C/E at position i, or nullopt when E == 0.
  std::optional<double> PredictabilityAt(std::size_t i) const;

  void Add(std::size_t i, std::uint32_t evaluations, std::uint32_t correct);

  // Members whose train draw held a single class and were skipped.
  const std::vector<int>& skipped_members() const { return skipped_; }
  void MarkSkipped(int member) { skipped_.push_back(member); }

  std::uint64_t TotalEvaluations() const;

  // {"<id>": {"E": n, "C": n}, ...} in ledger order.
  std::string ToJson() const;

  bool operator==(const PredictabilityLedger& other) const {
    return ids_ == other.ids_ && evaluations_ == other.evaluations_ &&
           correct_ == other.correct_ && skipped_ == other.skipped_;
  }

 private:
  std::vector<std::string> ids_;
  std::vector<std::uint32_t> evaluations_;
  std::vector<std::uint32_t> correct_;
  std::vector<int> skipped_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Throws UnknownId for an id not in the ledger.
std::optional<double> Predictability(const PredictabilityLedger& ledger,
                                     std::string_view id);

// The work and result of one ensemble member.
struct MemberOutcome {
  int member = 0;
  bool skipped = false;
  std::vector<std::size_t> train;     // draw order
  std::vector<std::size_t> held_out;  // ascending
  std::vector<std::uint8_t> correct;  // per held_out row: 0, 1 or 2 probes right
};

// Probe inputs for one ensemble pass. labels are positions in label_order.
struct EnsembleInput {
  const FeatureMatrix* features = nullptr;
  std::span<const int> labels;
  std::span<const std::string> label_order;
  std::span<const std::string> ids;
};

// Member-specific seed; the train draw and the SVM visiting order both come
// from it.
std::uint64_t MemberSeed(std::uint64_t seed, int member);

MemberOutcome RunMember(const EnsembleInput& input, const EnsembleConfig& cfg,
                        int member);

// Folds outcomes into a ledger. Order of outcomes does not matter except for
// the order skipped members are listed in, which is normalized ascending.
PredictabilityLedger Accumulate(std::span<const std::string> ids,
                                std::span<const MemberOutcome> outcomes);

// m members, each: draw t training rows without replacement, train logistic
// regression then SVM on them, evaluate both on the held-out rest. Every
// held-out row gains E += 1 per probe and C += 1 per correct probe.
PredictabilityLedger RunEnsemble(const EnsembleInput& input,
                                 const EnsembleConfig& cfg);

}  // namespace dqsel

#endif  // DQSEL_AFLITE_H_
