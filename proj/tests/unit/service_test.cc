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

#include <atomic>
#include <fstream>
#include <memory>
#include <thread>

#include <gtest/gtest.h>

#include "oracles.h"

namespace dqsel {
namespace {

using testing::TempDir;
using testing::ThrownCode;

ServiceOptions Options(const std::filesystem::path& dir, std::size_t snapshot_every = 64) {
  ServiceOptions o;
  o.state_dir = dir;
  o.snapshot_every = snapshot_every;
  auto tick = std::make_shared<std::atomic<int>>(0);
  o.clock = [tick] { return "2026-01-01T00:00:" + std::to_string(10 + (*tick)++) + "Z"; };
  return o;
}

DraftInput Input(std::string premise, std::string hypothesis, std::string label) {
  return DraftInput{{{"premise", std::move(premise)}, {"hypothesis", std::move(hypothesis)}},
                    std::move(label), std::nullopt, std::nullopt};
}

TEST(ServiceTest, FullLifecycle) {
  TempDir dir;
  auto svc = CreationService::Open(Options(dir.path()), testing::LeakageFixture());
  EXPECT_EQ(svc->dataset().size(), 4u);

  DraftRecord draft = svc->PostDraft(Input("A bird sings.", "A bird is silent.", "contradiction"));
  EXPECT_EQ(draft.draft_id, "d000001");
  EXPECT_EQ(draft.status, DraftStatus::kDraft);
  EXPECT_EQ(draft.report.dataset_size_at_eval, 5u);
  EXPECT_FALSE(draft.sample_id);

  std::string sample_id = svc->Submit(draft.draft_id);
  EXPECT_EQ(sample_id, "sample-000001");
  EXPECT_EQ(svc->Submit(draft.draft_id), sample_id);
  ASSERT_EQ(svc->Queue().size(), 1u);

  EXPECT_EQ(ThrownCode([&] { svc->Decide(sample_id, {"reject", "  ", "v1"}); }),
            ErrorCode::kMissingFeedback);
  DraftRecord rejected = svc->Decide(sample_id, {"reject", "too close to s1", "v1"});
  EXPECT_EQ(rejected.status, DraftStatus::kRejected);
  EXPECT_TRUE(svc->Queue().empty());
  EXPECT_EQ(svc->dataset().size(), 4u);

  DraftInput revised = Input("A bird sings loudly at dawn.", "Nothing makes noise.", "contradiction");
  revised.revises = draft.draft_id;
  DraftRecord second = svc->PostDraft(revised);
  EXPECT_EQ(second.revises, draft.draft_id);
  std::string second_id = svc->Submit(second.draft_id);
  DraftRecord accepted = svc->Decide(second_id, {"accept", "", "v2"});
  EXPECT_EQ(accepted.status, DraftStatus::kAccepted);
  EXPECT_EQ(svc->dataset().size(), 5u);
  EXPECT_TRUE(svc->dataset().Find(second_id));

  ServiceStats stats = svc->Stats();
  EXPECT_EQ(stats.size, 5u);
  EXPECT_EQ(stats.accepted, 1u);
  EXPECT_EQ(stats.rejected, 1u);
  EXPECT_DOUBLE_EQ(*stats.acceptance_rate, 0.5);
  ASSERT_EQ(stats.trajectory.size(), 1u);
  EXPECT_EQ(stats.trajectory[0].sample_id, second_id);
  EXPECT_EQ(stats.trajectory[0].scores,
            ComponentScores(svc->dataset(), nullptr, DqiConfig{}));
}

TEST(ServiceTest, StateErrors) {
  TempDir dir;
  auto svc = CreationService::Open(Options(dir.path()), testing::LeakageFixture());
  EXPECT_EQ(ThrownCode([&] { svc->Submit("d999"); }), ErrorCode::kUnknownDraft);
  EXPECT_EQ(ThrownCode([&] { svc->Decide("sample-9", {"accept", "", ""}); }),
            ErrorCode::kUnknownSample);
  EXPECT_EQ(ThrownCode([&] { svc->PostDraft(Input("a", "b", "neutral")); }),
            ErrorCode::kSchemaMismatch);
  DraftInput bad_revises = Input("a", "b", "entailment");
  bad_revises.revises = "d404";
  EXPECT_EQ(ThrownCode([&] { svc->PostDraft(bad_revises); }), ErrorCode::kUnknownDraft);

  DraftRecord d = svc->PostDraft(Input("a b", "c d", "entailment"));
  svc->Discard(d.draft_id);
  svc->Discard(d.draft_id);
  EXPECT_EQ(svc->GetDraft(d.draft_id).status, DraftStatus::kDiscarded);
  EXPECT_EQ(ThrownCode([&] { svc->Submit(d.draft_id); }), ErrorCode::kWrongState);

  DraftRecord e = svc->PostDraft(Input("e f", "g h", "entailment"));
  std::string id = svc->Submit(e.draft_id);
  EXPECT_EQ(ThrownCode([&] { svc->Discard(e.draft_id); }), ErrorCode::kWrongState);
  EXPECT_EQ(ThrownCode([&] { svc->Decide(id, {"maybe", "x", ""}); }), ErrorCode::kInvalidConfig);
  svc->Decide(id, {"accept", "", ""});
  EXPECT_EQ(ThrownCode([&] { svc->Decide(id, {"reject", "late", ""}); }), ErrorCode::kWrongState);
}

TEST(ServiceTest, OpenNeedsSeedOrLog) {
  TempDir dir;
  EXPECT_EQ(ThrownCode([&] { CreationService::Open(Options(dir.path()), std::nullopt); }),
            ErrorCode::kEmptyState);
  std::vector<std::size_t> one = {0};
  Dataset tiny = testing::LeakageFixture().Subset(one);
  EXPECT_EQ(ThrownCode([&] { CreationService::Open(Options(dir.path()), tiny); }),
            ErrorCode::kEmptyState);
}

void Drive(CreationService& svc) {
  for (int i = 0; i < 5; ++i) {
    DraftRecord d = svc.PostDraft(Input("premise " + std::to_string(i) + " words here",
                                        "hypothesis " + std::to_string(i),
                                        i % 2 ? "entailment" : "contradiction"));
    if (i == 4) break;
    std::string id = svc.Submit(d.draft_id);
    if (i == 3) continue;
    svc.Decide(id, i == 1 ? Decision{"reject", "vague", "v"} : Decision{"accept", "", "v"});
  }
}

TEST(ServiceTest, ReplayReconstructsIdenticalState) {
  for (std::size_t snapshot_every : {0u, 3u}) {
    TempDir dir;
    std::string before;
    {
      auto svc = CreationService::Open(Options(dir.path(), snapshot_every), testing::LeakageFixture());
      Drive(*svc);
      before = svc->CanonicalState();
    }
    EXPECT_EQ(std::filesystem::exists(dir / "snapshot.json"), snapshot_every != 0);
    auto reopened = CreationService::Open(Options(dir.path(), snapshot_every), std::nullopt);
    EXPECT_EQ(reopened->CanonicalState(), before);
    EXPECT_EQ(CreationService::ReplayCanonicalState(Options(dir.path())), before);
    EXPECT_EQ(reopened->Queue().size(), 1u);
    EXPECT_EQ(reopened->dataset().size(), 6u);
  }
}

TEST(ServiceTest, SeedIsIgnoredOnceStateExists) {
  TempDir dir;
  { CreationService::Open(Options(dir.path()), testing::LeakageFixture()); }
  Rng rng(81);
  testing::RandomCorpusOptions opt;
  Dataset other = testing::RandomCorpus(rng, opt);
  auto svc = CreationService::Open(Options(dir.path()), other);
  EXPECT_EQ(svc->dataset(), testing::LeakageFixture());
}

TEST(ServiceTest, TornTailIsDropped) {
  TempDir dir;
  std::string before;
  {
    auto svc = CreationService::Open(Options(dir.path(), 0), testing::LeakageFixture());
    Drive(*svc);
    before = svc->CanonicalState();
  }
  {
    std::ofstream out(dir / "events.jsonl", std::ios::binary | std::ios::app);
    out << R"({"seq": 99, "type": "subm)";
  }
  auto svc = CreationService::Open(Options(dir.path(), 0), std::nullopt);
  EXPECT_EQ(svc->CanonicalState(), before);
  svc->PostDraft(Input("x y", "z", "entailment"));
  auto again = CreationService::Open(Options(dir.path(), 0), std::nullopt);
  EXPECT_EQ(again->CanonicalState(), svc->CanonicalState());
}

TEST(ServiceTest, CorruptCompleteLineIsAnError) {
  TempDir dir;
  { CreationService::Open(Options(dir.path(), 0), testing::LeakageFixture()); }
  {
    std::ofstream out(dir / "events.jsonl", std::ios::binary | std::ios::app);
    out << "{garbage\n";
  }
  EXPECT_EQ(ThrownCode([&] { CreationService::Open(Options(dir.path(), 0), std::nullopt); }),
            ErrorCode::kMalformedRecord);
}

TEST(ServiceTest, ConcurrentDraftsAllCommit) {
  TempDir dir;
  auto svc = CreationService::Open(Options(dir.path()), testing::LeakageFixture());
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 5; ++i) {
        DraftRecord d = svc->PostDraft(
            Input("thread " + std::to_string(t), "item " + std::to_string(i), "entailment"));
        std::string id = svc->Submit(d.draft_id);
        svc->Decide(id, {"accept", "", "v"});
        (void)svc->Stats();
      }
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(svc->dataset().size(), 24u);
  EXPECT_EQ(svc->Stats().trajectory.size(), 20u);
  auto reopened = CreationService::Open(Options(dir.path()), std::nullopt);
  EXPECT_EQ(reopened->CanonicalState(), svc->CanonicalState());
}

}  // namespace
}  // namespace dqsel
