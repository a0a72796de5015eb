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

#include "dqsel/embeddings.h"

#include <cstring>
#include <fstream>

#include <gtest/gtest.h>

#include "oracles.h"

namespace dqsel {
namespace {

using testing::TempDir;
using testing::ThrownCode;

EmbeddingMatrix Small() {
  return EmbeddingMatrix(2, {1, 0, 0, 1, 1, 1, -1, 0}, {"a", "b", "c", "d"});
}

std::string Slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void Spit(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

TEST(EmbeddingMatrixTest, RejectsBadShapes) {
  EXPECT_EQ(ThrownCode([] { EmbeddingMatrix(0, {}, {}); }), ErrorCode::kInvariantViolation);
  EXPECT_EQ(ThrownCode([] { EmbeddingMatrix(2, {1}, {"a"}); }), ErrorCode::kInvariantViolation);
  EXPECT_EQ(ThrownCode([] { EmbeddingMatrix(1, {1, 2}, {"a", "a"}); }),
            ErrorCode::kInvariantViolation);
  EXPECT_EQ(ThrownCode([] { EmbeddingMatrix(1, {NAN}, {"a"}); }), ErrorCode::kInvariantViolation);
}

TEST(CodecTest, HeaderLayout) {
  std::string bytes = EncodeEmb(Small());
  ASSERT_EQ(bytes.size(), 20u + 8 * 4);
  EXPECT_EQ(bytes.substr(0, 4), "EMB1");
  std::uint32_t version;
  std::uint64_t rows;
  std::uint32_t dim;
  std::memcpy(&version, bytes.data() + 4, 4);
  std::memcpy(&rows, bytes.data() + 8, 8);
  std::memcpy(&dim, bytes.data() + 16, 4);
  EXPECT_EQ(version, 1u);
  EXPECT_EQ(rows, 4u);
  EXPECT_EQ(dim, 2u);
  EmbHeader h = DecodeEmbHeader(bytes);
  EXPECT_EQ(h.rows, 4u);
}

TEST(CodecTest, RandomRoundTripsAreBitExact) {
  TempDir dir;
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t rows = rng.UniformIndex(6);
    std::size_t dim = 1 + rng.UniformIndex(5);
    std::vector<float> values;
    std::vector<std::string> order;
    for (std::size_t r = 0; r < rows; ++r) {
      order.push_back("id" + std::to_string(r));
      for (std::size_t c = 0; c < dim; ++c) {
        std::uint32_t bits = static_cast<std::uint32_t>(rng.Next());
        float f;
        std::memcpy(&f, &bits, 4);
        if (!std::isfinite(f)) f = -0.0f;
        values.push_back(f);
      }
    }
    EmbeddingMatrix m(dim, values, order);
    EmbManifest manifest{order, {"burned" + std::to_string(trial)}, "test", dim};
    auto path = dir / "m.emb";
    WriteEmb(m, manifest, path);
    auto [back, back_manifest] = ReadEmb(path);
    ASSERT_EQ(back, m);
    ASSERT_EQ(back_manifest, manifest);
  }
}

TEST(CodecTest, CorruptFilesRaiseSpecificErrors) {
  TempDir dir;
  EmbeddingMatrix m = Small();
  EmbManifest manifest{m.order(), {}, "test", 2};
  auto path = dir / "m.emb";
  WriteEmb(m, manifest, path);
  const std::string good = Slurp(path);

  std::string bad = good;
  bad[0] = 'X';
  Spit(path, bad);
  EXPECT_EQ(ThrownCode([&] { ReadEmb(path); }), ErrorCode::kBadMagic);

  bad = good;
  bad[4] = 2;
  Spit(path, bad);
  EXPECT_EQ(ThrownCode([&] { ReadEmb(path); }), ErrorCode::kVersionMismatch);

  bad = good;
  bad[16] = 3;
  Spit(path, bad);
  EXPECT_EQ(ThrownCode([&] { ReadEmb(path); }), ErrorCode::kDimMismatch);

  Spit(path, good.substr(0, good.size() - 1));
  EXPECT_EQ(ThrownCode([&] { ReadEmb(path); }), ErrorCode::kTruncatedFile);

  Spit(path, good.substr(0, 10));
  EXPECT_EQ(ThrownCode([&] { ReadEmb(path); }), ErrorCode::kTruncatedFile);

  bad = good;
  bad[8] = static_cast<char>(0xff);
  bad[15] = 0x7f;  // absurd row count
  Spit(path, bad);
  EXPECT_TRUE(ThrownCode([&] { ReadEmb(path); }).has_value());

  Spit(path, good);
  std::filesystem::remove(ManifestPath(path));
  EXPECT_EQ(ThrownCode([&] { ReadEmb(path); }), ErrorCode::kIoFailure);
}

TEST(CodecTest, ManifestMustAgree) {
  TempDir dir;
  EmbeddingMatrix m = Small();
  EXPECT_EQ(ThrownCode([&] { WriteEmb(m, {{"a"}, {}, "", 2}, dir / "x.emb"); }),
            ErrorCode::kInvariantViolation);
  EXPECT_EQ(ThrownCode([&] { WriteEmb(m, {m.order(), {"a"}, "", 2}, dir / "x.emb"); }),
            ErrorCode::kInvariantViolation);
}

TEST(CosineTest, KnownValues) {
  std::vector<float> a = {1, 0};
  std::vector<float> b = {1, 1};
  std::vector<float> z = {0, 0};
  EXPECT_NEAR(Cosine(std::span<const float>(a), std::span<const float>(b)), 1 / std::sqrt(2.0),
              1e-12);
  EXPECT_EQ(Cosine(std::span<const float>(a), std::span<const float>(z)), 0.0);
  std::vector<float> c = {1, 0, 0};
  EXPECT_EQ(ThrownCode([&] { Cosine(std::span<const float>(a), std::span<const float>(c)); }),
            ErrorCode::kDimMismatch);
}

TEST(NearestTest, OrderedByCosineThenId) {
  EmbeddingMatrix m = Small();
  auto near = Nearest(m, "a", 3);
  ASSERT_EQ(near.size(), 3u);
  EXPECT_EQ(near[0].first, "c");
  EXPECT_EQ(near[1].first, "b");
  EXPECT_EQ(near[2].first, "d");
  EXPECT_EQ(ThrownCode([&] { Nearest(m, "a", 4); }), ErrorCode::kKOutOfRange);
  EXPECT_EQ(ThrownCode([&] { Nearest(m, "a", 0); }), ErrorCode::kKOutOfRange);
  EXPECT_EQ(ThrownCode([&] { Nearest(m, "q", 1); }), ErrorCode::kUnknownId);
}

}  // namespace
}  // namespace dqsel
