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

#include "dqsel/corpus.h"

#include <fstream>

#include <gtest/gtest.h>

#include "dqsel/error.h"
#include "oracles.h"

namespace dqsel {
namespace {

using testing::TempDir;
using testing::ThrownCode;

TEST(SchemaTest, ValidateRejectsEmptyAndRepeated) {
  TaskSchema ok{"t", {"a"}, {"x", "y"}};
  EXPECT_NO_THROW(ok.Validate());
  EXPECT_EQ(ThrownCode([] { TaskSchema{"t", {}, {"x"}}.Validate(); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(ThrownCode([] { TaskSchema{"t", {"a"}, {"x", "x"}}.Validate(); }),
            ErrorCode::kInvalidConfig);
  EXPECT_EQ(ok.LabelIndex("y"), 1u);
  EXPECT_FALSE(ok.LabelIndex("z"));
}

TEST(DatasetTest, RejectsDuplicateIdsAndUnknownLabels) {
  TaskSchema schema = testing::TwoLabelSchema();
  Sample a{"a", {{"premise", "p"}, {"hypothesis", "h"}}, "entailment", std::nullopt};
  EXPECT_EQ(ThrownCode([&] { Dataset(schema, {a, a}); }), ErrorCode::kDuplicateId);
  Sample bad = a;
  bad.label = "neutral";
  EXPECT_EQ(ThrownCode([&] { Dataset(schema, {bad}); }), ErrorCode::kUnknownLabel);
  Sample missing = a;
  missing.fields.erase("hypothesis");
  EXPECT_EQ(ThrownCode([&] { Dataset(schema, {missing}); }), ErrorCode::kSchemaMismatch);
}

TEST(DatasetTest, SubsetWithWithoutKeepOrder) {
  Dataset d = testing::LeakageFixture();
  std::vector<std::size_t> pick = {3, 1};
  Dataset sub = d.Subset(pick);
  ASSERT_EQ(sub.size(), 2u);
  EXPECT_EQ(sub[0].id, "s4");
  EXPECT_EQ(sub[1].id, "s2");
  EXPECT_EQ(sub.Find("s2"), 1u);
  Dataset without = d.Without(0);
  EXPECT_FALSE(without.Find("s1"));
  EXPECT_EQ(without.size(), 3u);
  Dataset with = without.With(d[0]);
  EXPECT_EQ(with[3].id, "s1");
}

TEST(JsonlTest, RoundTripPreservesEverything) {
  Rng rng(11);
  testing::RandomCorpusOptions opt;
  opt.splits = true;
  for (int trial = 0; trial < 50; ++trial) {
    Dataset d = testing::RandomCorpus(rng, opt);
    Dataset back = ParseDataset(SerializeDataset(d), d.schema());
    EXPECT_EQ(back, d);
  }
}

TEST(JsonlTest, FileRoundTripAndUnicode) {
  TempDir dir;
  TaskSchema schema = testing::TwoLabelSchema();
  Dataset d(schema, {Sample{"u1", {{"premise", "Ça \"quote\"\nnew"}, {"hypothesis", "日本語"}},
                            "entailment", "train"}});
  WriteDataset(d, dir / "d.jsonl");
  EXPECT_EQ(LoadDataset(dir / "d.jsonl", schema), d);
}

TEST(JsonlTest, MalformedLineReportsLineNumber) {
  TaskSchema schema = testing::TwoLabelSchema();
  std::string text =
      R"({"id":"a","fields":{"premise":"p","hypothesis":"h"},"label":"entailment"})"
      "\n\n{broken\n";
  try {
    ParseDataset(text, schema);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformedRecord);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(JsonlTest, MissingFileIsIoFailure) {
  EXPECT_EQ(ThrownCode([] { LoadDataset("/nonexistent/x.jsonl", testing::TwoLabelSchema()); }),
            ErrorCode::kIoFailure);
}

TEST(JsonlTest, InferSchemaUsesFirstRecordAndFirstSeenLabels) {
  TempDir dir;
  {
    std::ofstream out(dir / "d.jsonl");
    out << R"({"id":"a","fields":{"premise":"p","hypothesis":"h"},"label":"neutral"})" << "\n"
        << R"({"id":"b","fields":{"premise":"p","hypothesis":"h"},"label":"entailment"})"
        << "\n";
  }
  TaskSchema s = InferSchema(dir / "d.jsonl", "inferred");
  EXPECT_EQ(s.field_names, (std::vector<std::string>{"premise", "hypothesis"}));
  EXPECT_EQ(s.labels, (std::vector<std::string>{"neutral", "entailment"}));
}

TEST(SplitTest, DisjointExhaustiveDeterministic) {
  Rng rng(12);
  testing::RandomCorpusOptions opt;
  opt.samples = 37;
  Dataset d = testing::RandomCorpus(rng, opt);
  auto [a, b] = SplitDataset(d, 0.3, 9);
  EXPECT_EQ(a.size(), 11u);
  EXPECT_EQ(a.size() + b.size(), d.size());
  for (const auto& s : a.samples()) EXPECT_FALSE(b.Find(s.id));
  auto again = SplitDataset(d, 0.3, 9);
  EXPECT_EQ(again.first, a);
  // Original relative order is kept.
  for (std::size_t i = 1; i < a.size(); ++i) {
    EXPECT_LT(*d.Find(a[i - 1].id), *d.Find(a[i].id));
  }
}

TEST(CorpusTest, JoinedTextFollowsSchemaOrder) {
  Dataset d = testing::LeakageFixture();
  EXPECT_EQ(JoinedText(d[0], d.schema()), "A dog runs. A dog is not sleeping.");
}

}  // namespace
}  // namespace dqsel
