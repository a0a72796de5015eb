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

#include "dqsel/service.h"

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include "dqsel/error.h"
#include "json_util.h"

namespace dqsel {

using internal::Json;

namespace {

constexpr char kEventsFile[] = "events.jsonl";
constexpr char kSnapshotFile[] = "snapshot.json";

std::string UtcNow() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::optional<DraftStatus> ParseStatus(std::string_view s) {
  for (auto st : {DraftStatus::kDraft, DraftStatus::kSubmitted, DraftStatus::kAccepted,
                  DraftStatus::kRejected, DraftStatus::kDiscarded}) {
    if (DraftStatusName(st) == s) return st;
  }
  return std::nullopt;
}

std::string Numbered(std::string_view prefix, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu", n);
  return std::string(prefix) + buf;
}

bool Blank(const std::string& s) {
  return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

Json SchemaToJson(const TaskSchema& s) {
  return {{"name", s.name}, {"fields", s.field_names}, {"labels", s.labels}};
}

TaskSchema SchemaFromJson(const Json& j) {
  return TaskSchema{j.at("name").get<std::string>(),
                    j.at("fields").get<std::vector<std::string>>(),
                    j.at("labels").get<std::vector<std::string>>()};
}

Json SampleBody(const Sample& s, const TaskSchema& schema) {
  Json j;
  Json fields = Json::object();
  for (const auto& name : schema.field_names) {
    auto it = s.fields.find(name);
    if (it != s.fields.end()) fields[name] = it->second;
  }
  j["fields"] = std::move(fields);
  j["label"] = s.label;
  if (s.split) j["split"] = *s.split;
  return j;
}

Sample SampleFromBody(const Json& j) {
  Sample s;
  for (const auto& [name, value] : j.at("fields").items()) {
    s.fields[name] = value.get<std::string>();
  }
  s.label = j.at("label").get<std::string>();
  if (j.contains("split") && !j["split"].is_null()) s.split = j["split"].get<std::string>();
  return s;
}

Json ScoresToJson(const DqiVector& v) {
  Json j = Json::object();
  for (Component c : kAllComponents) {
    const auto& x = v[c];
    j[std::string(ComponentName(c))] = x ? Json(*x) : Json(nullptr);
  }
  return j;
}

DqiVector ScoresFromJson(const Json& j) {
  DqiVector v;
  for (Component c : kAllComponents) {
    const Json& x = j.at(std::string(ComponentName(c)));
    if (!x.is_null()) v[c] = x.get<double>();
  }
  return v;
}

Json OptionalString(const std::optional<std::string>& s) {
  return s ? Json(*s) : Json(nullptr);
}

std::optional<std::string> OptionalStringFrom(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<std::string>();
}

Json RecordToJson(const DraftRecord& r, const TaskSchema& schema, bool term_level) {
  Json j;
  j["draft_id"] = r.draft_id;
  j["sample_id"] = OptionalString(r.sample_id);
  j["status"] = DraftStatusName(r.status);
  j["created_at"] = r.created_at;
  j["revises"] = OptionalString(r.revises);
  j["sample"] = SampleBody(r.sample, schema);
  j["report"] = Json::parse(r.report.ToJson(term_level));
  if (r.decision) {
    j["decision"] = {{"verdict", r.decision->decision.verdict},
                     {"feedback", r.decision->decision.feedback},
                     {"validator_id", r.decision->decision.validator_id},
                     {"decided_at", r.decision->decided_at}};
  } else {
    j["decision"] = nullptr;
  }
  return j;
}

DraftRecord RecordFromJson(const Json& j) {
  DraftRecord r;
  r.draft_id = j.at("draft_id").get<std::string>();
  r.sample_id = OptionalStringFrom(j, "sample_id");
  auto status = ParseStatus(j.at("status").get<std::string>());
  if (!status) throw Error(ErrorCode::kMalformedRecord, "unknown draft status");
  r.status = *status;
  r.created_at = j.at("created_at").get<std::string>();
  r.revises = OptionalStringFrom(j, "revises");
  r.sample = SampleFromBody(j.at("sample"));
  if (r.sample_id) r.sample.id = *r.sample_id;
  r.report = DqiReport::FromJson(j.at("report").dump());
  if (!j.at("decision").is_null()) {
    const Json& d = j.at("decision");
    r.decision = DecisionRecord{{d.at("verdict").get<std::string>(),
                                 d.at("feedback").get<std::string>(),
                                 d.at("validator_id").get<std::string>()},
                                d.at("decided_at").get<std::string>()};
  }
  return r;
}

}  // namespace

std::string_view DraftStatusName(DraftStatus s) {
  switch (s) {
    case DraftStatus::kDraft: return "draft";
    case DraftStatus::kSubmitted: return "submitted";
    case DraftStatus::kAccepted: return "accepted";
    case DraftStatus::kRejected: return "rejected";
    case DraftStatus::kDiscarded: return "discarded";
  }
  return "draft";
}

std::string ServiceStats::ToJson() const {
  Json j;
  j["size"] = size;
  j["accepted"] = accepted;
  j["rejected"] = rejected;
  j["acceptance_rate"] = acceptance_rate ? Json(*acceptance_rate) : Json(nullptr);
  Json traj = Json::array();
  for (const auto& p : trajectory) {
    traj.push_back({{"sample_id", p.sample_id}, {"size", p.size}, {"scores", ScoresToJson(p.scores)}});
  }
  j["trajectory"] = std::move(traj);
  return internal::Dump(j);
}

struct CreationService::View {
  std::uint64_t seq = 0;
  Dataset dataset;
  std::map<std::string, DraftRecord> drafts;
  std::map<std::string, std::string> sample_to_draft;
  std::vector<std::string> queue;  // sample ids awaiting a decision
  std::vector<TrajectoryPoint> trajectory;
  std::size_t next_draft = 1;
  std::size_t next_sample = 1;
  std::size_t accepted = 0;
  std::size_t rejected = 0;

  Json ToJson() const {
    Json j;
    j["seq"] = seq;
    j["schema"] = SchemaToJson(dataset.schema());
    Json samples = Json::array();
    for (const auto& s : dataset.samples()) {
      samples.push_back(internal::SampleToJson(s, dataset.schema()));
    }
    j["samples"] = std::move(samples);
    Json records = Json::array();
    for (const auto& [id, r] : drafts) records.push_back(RecordToJson(r, dataset.schema(), true));
    j["drafts"] = std::move(records);
    j["queue"] = queue;
    Json traj = Json::array();
    for (const auto& p : trajectory) {
      traj.push_back({{"sample_id", p.sample_id}, {"size", p.size}, {"scores", ScoresToJson(p.scores)}});
    }
    j["trajectory"] = std::move(traj);
    j["counters"] = {{"next_draft", next_draft},
                     {"next_sample", next_sample},
                     {"accepted", accepted},
                     {"rejected", rejected}};
    return j;
  }

  static View FromJson(const Json& j) {
    View v;
    v.seq = j.at("seq").get<std::uint64_t>();
    TaskSchema schema = SchemaFromJson(j.at("schema"));
    std::vector<Sample> samples;
    std::size_t line = 0;
    for (const auto& s : j.at("samples")) {
      samples.push_back(internal::SampleFromJson(s, schema, "snapshot sample " + std::to_string(++line)));
    }
    v.dataset = Dataset(schema, std::move(samples));
    for (const auto& r : j.at("drafts")) {
      DraftRecord rec = RecordFromJson(r);
      if (rec.sample_id) v.sample_to_draft[*rec.sample_id] = rec.draft_id;
      v.drafts.emplace(rec.draft_id, std::move(rec));
    }
    v.queue = j.at("queue").get<std::vector<std::string>>();
    for (const auto& p : j.at("trajectory")) {
      v.trajectory.push_back({p.at("sample_id").get<std::string>(),
                              p.at("size").get<std::size_t>(),
                              ScoresFromJson(p.at("scores"))});
    }
    const Json& c = j.at("counters");
    v.next_draft = c.at("next_draft").get<std::size_t>();
    v.next_sample = c.at("next_sample").get<std::size_t>();
    v.accepted = c.at("accepted").get<std::size_t>();
    v.rejected = c.at("rejected").get<std::size_t>();
    return v;
  }

  // Applies one logged event. Every state change goes through here, both live
  // and during replay.
  void Apply(const Json& e, const DqiConfig& cfg) {
    auto type = e.at("type").get<std::string>();
    std::uint64_t event_seq = e.at("seq").get<std::uint64_t>();
    if (event_seq != seq + 1) {
      throw Error(ErrorCode::kInvariantViolation,
                  "event seq " + std::to_string(event_seq) + " after " + std::to_string(seq));
    }
    std::string at = e.at("at").get<std::string>();
    if (type == "seed") {
      TaskSchema schema = SchemaFromJson(e.at("schema"));
      std::vector<Sample> samples;
      std::size_t line = 0;
      for (const auto& s : e.at("samples")) {
        samples.push_back(internal::SampleFromJson(s, schema, "seed sample " + std::to_string(++line)));
      }
      dataset = Dataset(schema, std::move(samples));
    } else if (type == "draft_posted") {
      DraftRecord r;
      r.draft_id = e.at("draft_id").get<std::string>();
      r.sample = SampleFromBody(e.at("sample"));
      r.report = DqiReport::FromJson(e.at("report").dump());
      r.created_at = at;
      r.revises = OptionalStringFrom(e, "revises");
      drafts.emplace(r.draft_id, std::move(r));
      ++next_draft;
    } else if (type == "submitted") {
      DraftRecord& r = drafts.at(e.at("draft_id").get<std::string>());
      auto sample_id = e.at("sample_id").get<std::string>();
      r.sample_id = sample_id;
      r.sample.id = sample_id;
      r.status = DraftStatus::kSubmitted;
      sample_to_draft[sample_id] = r.draft_id;
      queue.push_back(sample_id);
      ++next_sample;
    } else if (type == "discarded") {
      drafts.at(e.at("draft_id").get<std::string>()).status = DraftStatus::kDiscarded;
    } else if (type == "decided") {
      auto sample_id = e.at("sample_id").get<std::string>();
      DraftRecord& r = drafts.at(sample_to_draft.at(sample_id));
      Decision d{e.at("verdict").get<std::string>(), e.at("feedback").get<std::string>(),
                 e.at("validator_id").get<std::string>()};
      r.decision = DecisionRecord{d, at};
      std::erase(queue, sample_id);
      if (d.verdict == "accept") {
        r.status = DraftStatus::kAccepted;
        dataset = dataset.With(r.sample);
        trajectory.push_back({sample_id, dataset.size(), ComponentScores(dataset, nullptr, cfg)});
        ++accepted;
      } else {
        r.status = DraftStatus::kRejected;
        ++rejected;
      }
    } else {
      throw Error(ErrorCode::kMalformedRecord, "unknown event type " + type);
    }
    seq = event_seq;
  }
};

struct CreationService::Impl {
  ServiceOptions options;
  std::mutex writer;
  mutable std::mutex view_mu;
  std::shared_ptr<const View> view;
  TaskSchema schema;
  std::ofstream log;
  std::size_t since_snapshot = 0;

  std::shared_ptr<const View> Load() const {
    std::lock_guard lock(view_mu);
    return view;
  }

  void Publish(std::shared_ptr<const View> v) {
    std::lock_guard lock(view_mu);
    view = std::move(v);
  }

  // Appends, flushes, then publishes. Caller holds `writer`.
  void Commit(Json event) {
    auto current = Load();
    event["seq"] = current->seq + 1;
    event["at"] = options.clock();
    auto next = std::make_shared<View>(*current);
    next->Apply(event, options.dqi);
    log << internal::Dump(event) << '\n';
    log.flush();
    if (!log) throw Error(ErrorCode::kIoFailure, "cannot append to event log");
    Publish(std::move(next));
    if (options.snapshot_every > 0 && ++since_snapshot >= options.snapshot_every) {
      WriteSnapshotLocked();
    }
  }

  void WriteSnapshotLocked() {
    auto path = options.state_dir / kSnapshotFile;
    auto tmp = path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << internal::Dump(Load()->ToJson()) << '\n';
      if (!out) throw Error(ErrorCode::kIoFailure, "cannot write snapshot");
    }
    std::filesystem::rename(tmp, path);
    since_snapshot = 0;
  }
};

namespace {

struct EventLog {
  std::vector<Json> events;
  std::uintmax_t valid_bytes = 0;  // through the last complete line
};

// Parsed log lines. A torn final line without a newline is dropped.
EventLog ReadEvents(const std::filesystem::path& path) {
  EventLog log;
  std::ifstream in(path, std::ios::binary);
  if (!in) return log;
  std::ostringstream buffer;
  buffer << in.rdbuf();
  std::string text = buffer.str();
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) break;
    std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    log.valid_bytes = pos;
    if (line.empty()) continue;
    try {
      log.events.push_back(Json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kMalformedRecord,
                  "event log line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return log;
}

}  // namespace

CreationService::CreationService(ServiceOptions options) : impl_(std::make_unique<Impl>()) {
  if (!options.clock) options.clock = UtcNow;
  impl_->options = std::move(options);
}

CreationService::~CreationService() = default;

std::shared_ptr<const CreationService::View> CreationService::Current() const {
  return impl_->Load();
}

std::unique_ptr<CreationService> CreationService::Open(ServiceOptions options,
                                                       const std::optional<Dataset>& seed) {
  options.dqi.Validate();
  std::filesystem::create_directories(options.state_dir);
  std::unique_ptr<CreationService> svc(new CreationService(std::move(options)));
  Impl& impl = *svc->impl_;
  const auto events_path = impl.options.state_dir / kEventsFile;
  const auto snapshot_path = impl.options.state_dir / kSnapshotFile;

  auto view = std::make_shared<View>();
  if (std::filesystem::exists(snapshot_path)) {
    std::ifstream in(snapshot_path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    try {
      *view = View::FromJson(Json::parse(buffer.str()));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kMalformedRecord, std::string("snapshot: ") + e.what());
    }
  }
  EventLog log = ReadEvents(events_path);
  try {
    for (const auto& e : log.events) {
      if (e.at("seq").get<std::uint64_t>() > view->seq) view->Apply(e, impl.options.dqi);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedRecord, std::string("event log: ") + e.what());
  }
  if (std::filesystem::exists(events_path) &&
      std::filesystem::file_size(events_path) != log.valid_bytes) {
    std::filesystem::resize_file(events_path, log.valid_bytes);
  }
  impl.log.open(events_path, std::ios::binary | std::ios::app);
  if (!impl.log) throw Error(ErrorCode::kIoFailure, "cannot open " + events_path.string());
  impl.Publish(view);

  if (view->seq == 0) {
    if (!seed || seed->size() < 2) {
      throw Error(ErrorCode::kEmptyState, "a seed dataset of at least 2 samples is required");
    }
    Json e;
    e["type"] = "seed";
    e["schema"] = SchemaToJson(seed->schema());
    Json samples = Json::array();
    for (const auto& s : seed->samples()) samples.push_back(internal::SampleToJson(s, seed->schema()));
    e["samples"] = std::move(samples);
    std::lock_guard lock(impl.writer);
    impl.Commit(std::move(e));
  }
  impl.schema = impl.Load()->dataset.schema();
  return svc;
}

DraftRecord CreationService::PostDraft(const DraftInput& input) {
  std::lock_guard lock(impl_->writer);
  auto view = Current();
  if (input.revises && !view->drafts.contains(*input.revises)) {
    throw Error(ErrorCode::kUnknownDraft, "revises unknown draft " + *input.revises);
  }
  Sample sample{"", input.fields, input.label, input.split};
  DqiReport report = QualityReport(view->dataset, nullptr, sample, impl_->options.dqi);
  std::string draft_id = Numbered("d", view->next_draft);
  Json e;
  e["type"] = "draft_posted";
  e["draft_id"] = draft_id;
  e["sample"] = SampleBody(sample, view->dataset.schema());
  e["report"] = Json::parse(report.ToJson(true));
  e["revises"] = OptionalString(input.revises);
  impl_->Commit(std::move(e));
  return Current()->drafts.at(draft_id);
}

std::string CreationService::Submit(const std::string& draft_id) {
  std::lock_guard lock(impl_->writer);
  auto view = Current();
  auto it = view->drafts.find(draft_id);
  if (it == view->drafts.end()) throw Error(ErrorCode::kUnknownDraft, draft_id);
  const DraftRecord& r = it->second;
  if (r.sample_id) return *r.sample_id;
  if (r.status != DraftStatus::kDraft) {
    throw Error(ErrorCode::kWrongState,
                draft_id + " is " + std::string(DraftStatusName(r.status)));
  }
  std::size_t n = view->next_sample;
  std::string sample_id = Numbered("sample-", n);
  while (view->dataset.Find(sample_id) || view->sample_to_draft.contains(sample_id)) {
    sample_id = Numbered("sample-", ++n) + "-" + draft_id;
  }
  Json e;
  e["type"] = "submitted";
  e["draft_id"] = draft_id;
  e["sample_id"] = sample_id;
  impl_->Commit(std::move(e));
  return sample_id;
}

void CreationService::Discard(const std::string& draft_id) {
  std::lock_guard lock(impl_->writer);
  auto view = Current();
  auto it = view->drafts.find(draft_id);
  if (it == view->drafts.end()) throw Error(ErrorCode::kUnknownDraft, draft_id);
  if (it->second.status == DraftStatus::kDiscarded) return;
  if (it->second.status != DraftStatus::kDraft) {
    throw Error(ErrorCode::kWrongState,
                draft_id + " is " + std::string(DraftStatusName(it->second.status)));
  }
  Json e;
  e["type"] = "discarded";
  e["draft_id"] = draft_id;
  impl_->Commit(std::move(e));
}

DraftRecord CreationService::Decide(const std::string& sample_id, const Decision& decision) {
  std::lock_guard lock(impl_->writer);
  auto view = Current();
  auto it = view->sample_to_draft.find(sample_id);
  if (it == view->sample_to_draft.end()) throw Error(ErrorCode::kUnknownSample, sample_id);
  const DraftRecord& r = view->drafts.at(it->second);
  if (r.status != DraftStatus::kSubmitted) {
    throw Error(ErrorCode::kWrongState,
                sample_id + " is " + std::string(DraftStatusName(r.status)));
  }
  if (decision.verdict != "accept" && decision.verdict != "reject") {
    throw Error(ErrorCode::kInvalidConfig, "verdict must be accept or reject");
  }
  if (decision.verdict == "reject" && Blank(decision.feedback)) {
    throw Error(ErrorCode::kMissingFeedback, "feedback is required when rejecting");
  }
  Json e;
  e["type"] = "decided";
  e["sample_id"] = sample_id;
  e["verdict"] = decision.verdict;
  e["feedback"] = decision.feedback;
  e["validator_id"] = decision.validator_id;
  impl_->Commit(std::move(e));
  return Current()->drafts.at(it->second);
}

std::vector<DraftRecord> CreationService::Queue() const {
  auto view = Current();
  std::vector<DraftRecord> out;
  for (const auto& sample_id : view->queue) {
    out.push_back(view->drafts.at(view->sample_to_draft.at(sample_id)));
  }
  return out;
}

DraftRecord CreationService::GetDraft(const std::string& draft_id) const {
  auto view = Current();
  auto it = view->drafts.find(draft_id);
  if (it == view->drafts.end()) throw Error(ErrorCode::kUnknownDraft, draft_id);
  return it->second;
}

DraftRecord CreationService::GetSample(const std::string& sample_id) const {
  auto view = Current();
  auto it = view->sample_to_draft.find(sample_id);
  if (it == view->sample_to_draft.end()) throw Error(ErrorCode::kUnknownSample, sample_id);
  return view->drafts.at(it->second);
}

ServiceStats CreationService::Stats() const {
  auto view = Current();
  ServiceStats s;
  s.size = view->dataset.size();
  s.accepted = view->accepted;
  s.rejected = view->rejected;
  if (s.accepted + s.rejected > 0) {
    s.acceptance_rate =
        static_cast<double>(s.accepted) / static_cast<double>(s.accepted + s.rejected);
  }
  s.trajectory = view->trajectory;
  return s;
}

Dataset CreationService::dataset() const { return Current()->dataset; }

const TaskSchema& CreationService::schema() const { return impl_->schema; }

std::string CreationService::CanonicalState() const {
  return internal::Dump(Current()->ToJson());
}

void CreationService::WriteSnapshot() {
  std::lock_guard lock(impl_->writer);
  impl_->WriteSnapshotLocked();
}

std::string CreationService::ReplayCanonicalState(const ServiceOptions& options) {
  View view;
  for (const auto& e : ReadEvents(options.state_dir / kEventsFile).events) view.Apply(e, options.dqi);
  return internal::Dump(view.ToJson());
}

std::string DraftRecord::ToJson(bool term_level, const TaskSchema* schema) const {
  if (schema) return internal::Dump(RecordToJson(*this, *schema, term_level));
  TaskSchema from_fields;
  for (const auto& [name, text] : sample.fields) from_fields.field_names.push_back(name);
  return internal::Dump(RecordToJson(*this, from_fields, term_level));
}

}  // namespace dqsel
