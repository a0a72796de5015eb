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

#include "dqsel/synthetic.h"

#include <map>
#include <set>

#include <gtest/gtest.h>

#include "dqsel/textstats.h"
#include "oracles.h"

namespace dqsel {
namespace {

TEST(SyntheticTest, ShapeAndPlantedProperties) {
  PlantedConfig cfg;
  cfg.samples = 400;
  cfg.planted = 40;
  PlantedCorpus c = MakePlantedCorpus(cfg);
  ASSERT_EQ(c.dataset.size(), 400u);
  ASSERT_EQ(c.embeddings.rows(), 400u);
  EXPECT_EQ(c.embeddings.dim(), 16u);
  ASSERT_EQ(c.planted_ids.size(), 40u);
  EXPECT_TRUE(std::is_sorted(c.planted_ids.begin(), c.planted_ids.end()));
  std::map<std::string, int> texts;
  for (const auto& id : c.planted_ids) {
    const Sample& s = c.dataset[*c.dataset.Find(id)];
    EXPECT_EQ(s.label, "contradiction");
    auto tokens = TokenizeSample(s, c.dataset.schema());
    EXPECT_NE(std::find(tokens.begin(), tokens.end(), "not"), tokens.end());
    ++texts[JoinedText(s, c.dataset.schema())];
    EXPECT_GT(c.embeddings.Row(*c.embeddings.Find(id))[0], 1.0f);
  }
  // Five groups of eight identical texts.
  EXPECT_EQ(texts.size(), 5u);
  for (const auto& [text, count] : texts) EXPECT_EQ(count, 8);
}

TEST(SyntheticTest, DeterministicPerSeed) {
  PlantedConfig cfg;
  cfg.samples = 100;
  cfg.planted = 16;
  PlantedCorpus a = MakePlantedCorpus(cfg);
  PlantedCorpus b = MakePlantedCorpus(cfg);
  EXPECT_EQ(a.dataset, b.dataset);
  EXPECT_EQ(a.embeddings, b.embeddings);
  cfg.seed = 2;
  EXPECT_NE(MakePlantedCorpus(cfg).dataset, a.dataset);
}

TEST(SyntheticTest, TokenLabelNmiMatchesCounts) {
  Dataset d = testing::LeakageFixture();
  // "not" exactly marks contradiction.
  EXPECT_NEAR(TokenLabelNmi(d, "not"), 1.0, 1e-12);
  EXPECT_NEAR(TokenLabelNmi(d, "absent"), 0.0, 1e-12);
  // "a" occurs in s1, s2, s3: table {2,1 ; 0,1}.
  double h_x = -(0.75 * std::log(0.75) + 0.25 * std::log(0.25));
  double h_y = std::log(2.0);
  double h_xy = -(0.5 * std::log(0.5) + 2 * 0.25 * std::log(0.25));
  double mi = h_x + h_y - h_xy;
  EXPECT_NEAR(TokenLabelNmi(d, "a"), mi / std::min(h_x, h_y), 1e-12);
}

}  // namespace
}  // namespace dqsel
