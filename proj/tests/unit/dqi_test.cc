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

#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "dqsel/textstats.h"
#include "oracles.h"

namespace dqsel {
namespace {

using testing::ThrownCode;

constexpr double kTol = 1e-9;

double Log2(double x) { return std::log2(x); }

std::optional<double> Naive(const Dataset& d, const EmbeddingMatrix* emb, const DqiConfig& cfg,
                            std::size_t i, Component c) {
  auto full = ComponentScores(d, emb, cfg)[c];
  auto without = ComponentScores(d.Without(i), emb, cfg)[c];
  if (!full || !without) return std::nullopt;
  return *full - *without;
}

TEST(DqiHandTest, InterSampleOverlap) {
  DqiVector v = ComponentScores(testing::LeakageFixture(), nullptr, DqiConfig{});
  ASSERT_TRUE(v[Component::kC3]);
  EXPECT_NEAR(*v[Component::kC3], (0.7 + 0.7 + 10.0 / 11.0 + 1.0) / 4.0, kTol);
}

TEST(DqiHandTest, IntraSampleOverlap) {
  // Field-pair Jaccard 1/3, 1/7, 1/3, 1/5 fall in bins 3, 1, 3, 2; NMI = 0.5.
  DqiVector v = ComponentScores(testing::LeakageFixture(), nullptr, DqiConfig{});
  ASSERT_TRUE(v[Component::kC4]);
  EXPECT_NEAR(*v[Component::kC4], 0.5, kTol);
}

TEST(DqiHandTest, LabelLeakageUnsmoothed) {
  DqiConfig cfg;
  cfg.pmi_alpha = 0.0;
  DqiVector v = ComponentScores(testing::LeakageFixture(), nullptr, cfg);
  double m1 = (Log2(4.0 / 3.0) + 5.0) / 6.0;
  double m2 = (Log2(4.0 / 3.0) + 6.0) / 7.0;
  double m3 = (Log2(2.0 / 3.0) + 5.0) / 6.0;
  double m4 = 1.0;
  double expected = (1 / (1 + m1) + 1 / (1 + m2) + 1 / (1 + m3) + 1 / (1 + m4)) / 4.0;
  ASSERT_TRUE(v[Component::kC6]);
  EXPECT_NEAR(*v[Component::kC6], expected, kTol);
}

TEST(DqiHandTest, SplitLeakage) {
  TaskSchema schema = testing::TwoLabelSchema();
  auto make = [](std::string id, std::string p, std::string split) {
    return Sample{std::move(id), {{"premise", std::move(p)}, {"hypothesis", "x"}},
                  "entailment", std::move(split)};
  };
  // Token sets: {a,b,x}, {c,d,x}, {a,b,e,x}, {f,x}.
  Dataset d(schema, {make("t1", "a b", "train"), make("t2", "c d", "train"),
                     make("e1", "a b e", "test"), make("e2", "f", "dev")});
  DqiVector v = ComponentScores(d, nullptr, DqiConfig{});
  ASSERT_TRUE(v[Component::kC7]);
  EXPECT_NEAR(*v[Component::kC7], ((1 - 3.0 / 4.0) + (1 - 1.0 / 4.0)) / 2.0, kTol);
  DqiVector no_splits = ComponentScores(testing::LeakageFixture(), nullptr, DqiConfig{});
  EXPECT_FALSE(no_splits[Component::kC7]);
}

TEST(DqiHandTest, VocabularyMatchesNaive) {
  Rng rng(61);
  for (int trial = 0; trial < 50; ++trial) {
    Dataset d = testing::RandomCorpus(rng, {});
    std::unordered_map<std::string, std::uint32_t> ids;
    std::vector<std::vector<std::uint32_t>> tokens;
    for (const auto& s : d.samples()) {
      tokens.emplace_back();
      for (const auto& t : TokenizeSample(s, d.schema())) {
        tokens.back().push_back(ids.emplace(t, ids.size()).first->second);
      }
    }
    double expected = testing::NaiveC1(tokens, std::vector<char>(d.size(), 1));
    EXPECT_NEAR(*ComponentScores(d, nullptr, DqiConfig{})[Component::kC1], expected, 1e-12);
  }
}

TEST(DqiPropertyTest, ScoresStayInUnitInterval) {
  Rng rng(62);
  for (int trial = 0; trial < 1000; ++trial) {
    testing::RandomCorpusOptions opt;
    opt.samples = 2 + rng.UniformIndex(12);
    opt.fields = 1 + rng.UniformIndex(3);
    opt.labels = 1 + rng.UniformIndex(3);
    opt.vocab = 1 + rng.UniformIndex(15);
    opt.max_tokens = rng.UniformIndex(7);
    opt.splits = rng.UniformIndex(2) == 0;
    Dataset d = testing::RandomCorpus(rng, opt);
    DqiConfig cfg;
    cfg.pmi_alpha = trial % 3 == 0 ? 0.0 : 1.0;
    std::optional<EmbeddingMatrix> emb;
    if (trial % 2) emb = testing::RandomEmbeddings(rng, d, 3);
    DqiVector v = ComponentScores(d, emb ? &*emb : nullptr, cfg);
    for (Component c : kAllComponents) {
      if (!v[c]) continue;
      ASSERT_TRUE(std::isfinite(*v[c])) << ComponentName(c) << " trial " << trial;
      ASSERT_GE(*v[c], 0.0) << ComponentName(c) << " trial " << trial;
      ASSERT_LE(*v[c], 1.0) << ComponentName(c) << " trial " << trial;
    }
  }
}

TEST(DqiPropertyTest, SampleOrderDoesNotMatter) {
  Rng rng(63);
  for (int trial = 0; trial < 30; ++trial) {
    testing::RandomCorpusOptions opt;
    opt.splits = true;
    Dataset d = testing::RandomCorpus(rng, opt);
    EmbeddingMatrix emb = testing::RandomEmbeddings(rng, d, 4);
    std::vector<std::size_t> perm(d.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.Shuffle(perm);
    Dataset shuffled = d.Subset(perm);
    for (const EmbeddingMatrix* e : std::array<const EmbeddingMatrix*, 2>{nullptr, &emb}) {
      DqiVector a = ComponentScores(d, e, DqiConfig{});
      DqiVector b = ComponentScores(shuffled, e, DqiConfig{});
      for (Component c : kAllComponents) {
        ASSERT_EQ(a[c].has_value(), b[c].has_value());
        if (a[c]) {
          EXPECT_NEAR(*a[c], *b[c], 1e-12) << ComponentName(c);
        }
      }
    }
  }
}

TEST(DqiEngineTest, ScoresMatchDirectEvaluation) {
  Rng rng(64);
  for (int trial = 0; trial < 30; ++trial) {
    testing::RandomCorpusOptions opt;
    opt.splits = true;
    opt.samples = 3 + rng.UniformIndex(20);
    Dataset d = testing::RandomCorpus(rng, opt);
    EmbeddingMatrix emb = testing::RandomEmbeddings(rng, d, 3);
    for (const EmbeddingMatrix* e : std::array<const EmbeddingMatrix*, 2>{nullptr, &emb}) {
      DqiVector direct = ComponentScores(d, e, DqiConfig{});
      DqiVector engine = DqiEngine(d, e, DqiConfig{}).Scores();
      for (Component c : kAllComponents) {
        ASSERT_EQ(direct[c].has_value(), engine[c].has_value()) << ComponentName(c);
        if (direct[c]) {
          EXPECT_NEAR(*direct[c], *engine[c], 1e-9) << ComponentName(c);
        }
      }
    }
  }
}

TEST(DqiEngineTest, ImpactMatchesNaiveLeaveOneOut) {
  Rng rng(65);
  for (int trial = 0; trial < 25; ++trial) {
    testing::RandomCorpusOptions opt;
    opt.splits = true;
    opt.samples = 3 + rng.UniformIndex(15);
    opt.labels = 2 + rng.UniformIndex(2);
    Dataset d = testing::RandomCorpus(rng, opt);
    EmbeddingMatrix emb = testing::RandomEmbeddings(rng, d, 3);
    DqiConfig cfg;
    cfg.pmi_alpha = trial % 2 ? 0.5 : 1.0;
    for (const EmbeddingMatrix* e : std::array<const EmbeddingMatrix*, 2>{nullptr, &emb}) {
      DqiEngine engine(d, e, cfg);
      std::vector<ImpactVector> all = engine.AllImpacts();
      for (std::size_t i = 0; i < d.size(); ++i) {
        ImpactVector iv = engine.Impact(i);
        for (Component c : kAllComponents) {
          auto expected = Naive(d, e, cfg, i, c);
          ASSERT_EQ(iv[c].has_value(), expected.has_value())
              << ComponentName(c) << " trial " << trial << " sample " << i;
          if (expected) {
            EXPECT_NEAR(*iv[c], *expected, 1e-9) << ComponentName(c) << " sample " << i;
            EXPECT_EQ(*all[i][c], *iv[c]);
          }
        }
      }
    }
  }
}

TEST(DqiEngineTest, MaskLimitsComponents) {
  Rng rng(66);
  Dataset d = testing::RandomCorpus(rng, {});
  DqiEngine::ComponentMask mask;
  mask.set(static_cast<std::size_t>(Component::kC3));
  DqiEngine engine(d, nullptr, DqiConfig{}, mask);
  ImpactVector iv = engine.Impact(0);
  EXPECT_TRUE(iv[Component::kC3]);
  EXPECT_FALSE(iv[Component::kC1]);
  EXPECT_FALSE(iv[Component::kC6]);
}

TEST(DqiEngineTest, StandaloneTermsInRange) {
  Rng rng(67);
  Dataset d = testing::RandomCorpus(rng, {});
  DqiEngine engine(d, nullptr, DqiConfig{});
  for (std::size_t i = 0; i < d.size(); ++i) {
    ImpactVector iv = engine.Standalone(i);
    ASSERT_TRUE(iv[Component::kC3]);
    EXPECT_GE(*iv[Component::kC3], 0.0);
    EXPECT_LE(*iv[Component::kC3], 1.0);
    ASSERT_TRUE(iv[Component::kC6]);
  }
  // s4 shares nothing with any other sample.
  Dataset fixture = testing::LeakageFixture();
  DqiEngine fixed(fixture, nullptr, DqiConfig{});
  EXPECT_NEAR(*fixed.Standalone(3)[Component::kC3], 1.0, kTol);
  EXPECT_NEAR(*fixed.Standalone(0)[Component::kC3], 0.7, kTol);
  auto nearest = fixed.NearestByJaccard(0);
  ASSERT_TRUE(nearest);
  EXPECT_EQ(nearest->index, 1u);
  EXPECT_NEAR(nearest->similarity, 0.3, kTol);
}

TEST(DqiEngineTest, SmallAndMissingInputs) {
  Dataset d = testing::LeakageFixture();
  std::vector<std::size_t> two = {0, 1};
  Dataset pair = d.Subset(two);
  DqiEngine engine(pair, nullptr, DqiConfig{});
  EXPECT_EQ(ThrownCode([&] { engine.Impact(0); }), ErrorCode::kDatasetTooSmall);
  std::vector<std::size_t> one = {0};
  EXPECT_EQ(ThrownCode([&] { ComponentScores(d.Subset(one), nullptr, DqiConfig{}); }),
            ErrorCode::kDatasetTooSmall);
  DqiConfig forced;
  forced.c5_source = SimilaritySource::kEmbedding;
  EXPECT_EQ(ThrownCode([&] { ComponentScores(d, nullptr, forced); }),
            ErrorCode::kMissingEmbeddings);
  EXPECT_EQ(ThrownCode([&] { SampleImpact(d, "zz", nullptr, DqiConfig{}); }),
            ErrorCode::kUnknownId);
}

TEST(DqiEngineTest, SampleImpactMatchesEngine) {
  Dataset d = testing::LeakageFixture();
  ImpactVector a = SampleImpact(d, "s2", nullptr, DqiConfig{});
  ImpactVector b = DqiEngine(d, nullptr, DqiConfig{}).Impact(1);
  for (Component c : kAllComponents) EXPECT_EQ(a[c], b[c]);
}

TEST(CompositeTest, WeightedMeanOverPresentComponents) {
  ImpactVector iv;
  iv[Component::kC1] = 0.2;
  iv[Component::kC3] = -0.4;
  DqiConfig cfg;
  cfg.sort_components = {Component::kC1, Component::kC3, Component::kC6};
  cfg.weights[static_cast<std::size_t>(Component::kC1)] = 3;
  EXPECT_NEAR(CompositeDqi(iv, cfg), (3 * 0.2 - 0.4) / 4, 1e-15);
  cfg.sort_components = {Component::kC6};
  EXPECT_EQ(ThrownCode([&] { CompositeDqi(iv, cfg); }), ErrorCode::kNoDefinedComponents);
}

TEST(NmiTest, KnownTables) {
  EXPECT_NEAR(NormalizedMutualInformation({5, 0, 0, 5}, 2, 2), 1.0, 1e-12);
  EXPECT_NEAR(NormalizedMutualInformation({5, 5, 5, 5}, 2, 2), 0.0, 1e-12);
  EXPECT_EQ(NormalizedMutualInformation({4, 4}, 1, 2), 0.0);
  // Bins {3,1,3,2} against labels {C,C,E,E}.
  EXPECT_NEAR(NormalizedMutualInformation({1, 1, 1, 0, 0, 1}, 3, 2), 0.5, 1e-12);
}

TEST(BinTest, EqualWidthClamped) {
  EXPECT_EQ(BinOf(0.0, 10), 0u);
  EXPECT_EQ(BinOf(0.0999, 10), 0u);
  EXPECT_EQ(BinOf(0.1, 10), 1u);
  EXPECT_EQ(BinOf(1.0, 10), 9u);
  EXPECT_EQ(BinOf(7.0, 10), 9u);
  EXPECT_EQ(BinOf(-3.0, 10), 0u);
}

TEST(ColorTest, ThresholdEdges) {
  DqiConfig cfg;
  EXPECT_EQ(ColorForPercentile(0.0, cfg), Color::kRed);
  EXPECT_EQ(ColorForPercentile(0.2499, cfg), Color::kRed);
  EXPECT_EQ(ColorForPercentile(0.25, cfg), Color::kYellow);
  EXPECT_EQ(ColorForPercentile(0.5999, cfg), Color::kYellow);
  EXPECT_EQ(ColorForPercentile(0.6, cfg), Color::kGreen);
  EXPECT_EQ(ColorForPercentile(1.0, cfg), Color::kGreen);
}

TEST(DqiConfigTest, RoundTripAndValidation) {
  DqiConfig cfg;
  cfg.weights[2] = 2.5;
  cfg.sort_components = {Component::kC3, Component::kC6};
  cfg.pmi_alpha = 0.25;
  cfg.c5_source = SimilaritySource::kBagOfWords;
  cfg.standalone_scores = true;
  EXPECT_EQ(ParseDqiConfig(DqiConfigToJson(cfg)), cfg);
  EXPECT_EQ(ParseDqiConfig(DefaultDqiConfigText()), DqiConfig{});
  EXPECT_EQ(ThrownCode([] { ParseDqiConfig(R"({"bogus": 1})"); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(ThrownCode([] { ParseDqiConfig(R"({"mi_bins": 1})"); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(ThrownCode([] { ParseDqiConfig(R"({"sort_components": ["C9"]})"); }),
            ErrorCode::kInvalidConfig);
  EXPECT_EQ(ThrownCode([] { ParseDqiConfig("[1,"); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(ThrownCode([] {
              ParseDqiConfig(R"({"sort_components": ["C2", "C4"], "standalone_scores": true})");
            }),
            ErrorCode::kInvalidConfig);
  EXPECT_EQ(ThrownCode([] {
              ParseDqiConfig(R"({"thresholds": {"red_below": 0.7, "green_at_or_above": 0.6}})");
            }),
            ErrorCode::kInvalidConfig);
}

Sample Draft(std::string premise, std::string hypothesis, std::string label) {
  return Sample{"", {{"premise", std::move(premise)}, {"hypothesis", std::move(hypothesis)}},
                std::move(label), std::nullopt};
}

TEST(QualityReportTest, DuplicateDraftGetsRedOverlapWithRecommendation) {
  Dataset state = testing::LeakageFixture();
  DqiReport r = QualityReport(state, nullptr,
                              Draft("A dog runs.", "A dog is not sleeping.", "contradiction"),
                              DqiConfig{});
  EXPECT_EQ(r.dataset_size_at_eval, 5u);
  const ComponentFeedback* c3 = r.Find(Component::kC3);
  ASSERT_NE(c3, nullptr);
  EXPECT_EQ(c3->color, Color::kRed);
  EXPECT_FALSE(c3->feedback.empty());
  bool has_duplicate = false;
  for (const auto& rec : c3->recommendations) {
    has_duplicate |= rec.kind == "near_duplicate" && rec.target == "s1";
  }
  EXPECT_TRUE(has_duplicate);
  const ComponentFeedback* c6 = r.Find(Component::kC6);
  ASSERT_NE(c6, nullptr);
  for (const auto& fb : r.components) {
    EXPECT_GE(fb.percentile, 0.0);
    EXPECT_LE(fb.percentile, 1.0);
    EXPECT_EQ(fb.color, ColorForPercentile(fb.percentile, DqiConfig{}));
  }
  EXPECT_TRUE(r.composite);
}

TEST(QualityReportTest, JsonRoundTrip) {
  DqiReport r = QualityReport(testing::LeakageFixture(), nullptr,
                              Draft("A bird flies high.", "Birds never land.", "entailment"),
                              DqiConfig{});
  EXPECT_EQ(DqiReport::FromJson(r.ToJson(true)), r);
  DqiReport shallow = DqiReport::FromJson(r.ToJson(false));
  for (const auto& fb : shallow.components) EXPECT_TRUE(fb.terms.empty());
}

TEST(QualityReportTest, Errors) {
  Dataset state = testing::LeakageFixture();
  EXPECT_EQ(ThrownCode([&] { QualityReport(state, nullptr, Draft("a", "b", "neutral"), {}); }),
            ErrorCode::kSchemaMismatch);
  Sample missing = Draft("a", "b", "entailment");
  missing.fields.erase("hypothesis");
  EXPECT_EQ(ThrownCode([&] { QualityReport(state, nullptr, missing, {}); }),
            ErrorCode::kSchemaMismatch);
  std::vector<std::size_t> one = {0};
  EXPECT_EQ(ThrownCode([&] {
              QualityReport(state.Subset(one), nullptr, Draft("a", "b", "entailment"), {});
            }),
            ErrorCode::kEmptyState);
}

}  // namespace
}  // namespace dqsel
