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

#ifndef DQSEL_SERVICE_H_
#define DQSEL_SERVICE_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "dqsel/corpus.h"
#include "dqsel/dqi.h"

namespace dqsel {

enum class DraftStatus { kDraft, kSubmitted, kAccepted, kRejected, kDiscarded };

std::string_view DraftStatusName(DraftStatus s);

struct Decision {
  std::string verdict;  // "accept" or "reject"
  std::string feedback;
  std::string validator_id;
};

struct DecisionRecord {
  Decision decision;
  std::string decided_at;

  bool operator==(const DecisionRecord& o) const {
    return decision.verdict == o.decision.verdict &&
           decision.feedback == o.decision.feedback &&
           decision.validator_id == o.decision.validator_id && decided_at == o.decided_at;
  }
};

struct DraftInput {
  std::map<std::string, std::string> fields;
  std::string label;
  std::optional<std::string> split;
  std::optional<std::string> revises;  // draft id this one revises
};

struct DraftRecord {
  std::string draft_id;
  std::optional<std::string> sample_id;  // assigned on submit
  Sample sample;                         // id empty until submitted
  DqiReport report;
  std::string created_at;
  DraftStatus status = DraftStatus::kDraft;
  std::optional<std::string> revises;
  std::optional<DecisionRecord> decision;

  // Fields follow the schema's order when one is given.
  std::string ToJson(bool term_level = false, const TaskSchema* schema = nullptr) const;
  bool operator==(const DraftRecord&) const = default;
};

struct TrajectoryPoint {
  std::string sample_id;
  std::size_t size = 0;
  DqiVector scores;

  bool operator==(const TrajectoryPoint&) const = default;
};

struct ServiceStats {
  std::size_t size = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::optional<double> acceptance_rate;  // accepted / decided
  std::vector<TrajectoryPoint> trajectory;

  std::string ToJson() const;
};

struct ServiceOptions {
  std::filesystem::path state_dir;
  DqiConfig dqi;
  // Timestamp source; defaults to UTC wall clock in ISO 8601.
  std::function<std::string()> clock;
  // Events between snapshot files; 0 disables snapshots.
  std::size_t snapshot_every = 64;
};

// Draft feedback, submission, validation and dataset state. State lives in an
// append-only event log (events.jsonl) plus a periodic snapshot
// (snapshot.json) under state_dir. Mutations are serialized; reads see the
// latest committed view.
class CreationService {
 public:
  // Replays an existing log, or starts one from `seed` (at least 2 samples).
  // Throws EmptyState when there is neither.
  static std::unique_ptr<CreationService> Open(ServiceOptions options,
                                               const std::optional<Dataset>& seed);
  ~CreationService();

  // Throws SchemaMismatch or UnknownDraft (bad revises).
  DraftRecord PostDraft(const DraftInput& input);
  // Idempotent once a sample id exists. Throws UnknownDraft or WrongState.
  std::string Submit(const std::string& draft_id);
  void Discard(const std::string& draft_id);
  // Throws UnknownSample, WrongState, MissingFeedback.
  DraftRecord Decide(const std::string& sample_id, const Decision& decision);

  std::vector<DraftRecord> Queue() const;
  DraftRecord GetDraft(const std::string& draft_id) const;
  DraftRecord GetSample(const std::string& sample_id) const;
  ServiceStats Stats() const;
  Dataset dataset() const;
  const TaskSchema& schema() const;

  // Deterministic serialization of the full state; equal after replay.
  std::string CanonicalState() const;
  // Forces a snapshot file now.
  void WriteSnapshot();

  // Rebuilds state from the log alone, ignoring any snapshot.
  static std::string ReplayCanonicalState(const ServiceOptions& options);

 private:
  struct View;
  struct Impl;
  explicit CreationService(ServiceOptions options);

  std::shared_ptr<const View> Current() const;

  std::unique_ptr<Impl> impl_;
};

}  // namespace dqsel

#endif  // DQSEL_SERVICE_H_
