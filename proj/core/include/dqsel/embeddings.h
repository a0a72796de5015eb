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

#ifndef DQSEL_EMBEDDINGS_H_
#define DQSEL_EMBEDDINGS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dqsel {

// Row-major float32 matrix with one row per sample id.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  // Throws Error(kInvariantViolation) if the shape, id uniqueness or
  // finiteness invariants fail.
  EmbeddingMatrix(std::size_t dim, std::vector<float> values,
                  std::vector<std::string> order);

  std::size_t dim() const { return dim_; }
  std::size_t rows() const { return order_.size(); }
  const std::vector<std::string>& order() const { return order_; }
  const std::vector<float>& values() const { return values_; }

  std::span<const float> Row(std::size_t i) const {
    return {values_.data() + i * dim_, dim_};
  }
  std::optional<std::size_t> Find(std::string_view id) const;

  bool operator==(const EmbeddingMatrix& other) const;

 private:
  std::size_t dim_ = 0;
  std::vector<float> values_;
  std::vector<std::string> order_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct EmbManifest {
  std::vector<std::string> order;
  std::vector<std::string> burned;
  std::string source;
  std::size_t dim = 0;

  bool operator==(const EmbManifest&) const = default;
};

// EMB1 layout, little-endian: "EMB1", u32 version (1), u64 rows, u32 dim,
// then rows * dim f32. Ids live only in the manifest.
inline constexpr std::uint32_t kEmbVersion = 1;

// Writes `<path>` and `<path>.manifest.json`. Throws kInvariantViolation when
// the manifest disagrees with the matrix or lists a burned id in the order,
// kIoFailure on write errors.
void WriteEmb(const EmbeddingMatrix& m, const EmbManifest& manifest,
              const std::filesystem::path& path);

// Throws BadMagic, VersionMismatch, DimMismatch, TruncatedFile, IoFailure or
// InvariantViolation.
std::pair<EmbeddingMatrix, EmbManifest> ReadEmb(const std::filesystem::path& path);

// Binary payload alone, for in-memory round trips.
std::string EncodeEmb(const EmbeddingMatrix& m);
struct EmbHeader {
  std::uint32_t version = 0;
  std::uint64_t rows = 0;
  std::uint32_t dim = 0;
};
EmbHeader DecodeEmbHeader(std::string_view bytes);

std::filesystem::path ManifestPath(const std::filesystem::path& path);

// Cosine similarity; 0 when either vector is all zeros. Throws
// Error(kDimMismatch) on unequal lengths.
double Cosine(std::span<const float> u, std::span<const float> v);
double Cosine(std::span<const double> u, std::span<const double> v);

// Exact scan for the k rows most similar to `id`, excluding the query row,
// ordered by descending cosine then ascending id. Throws UnknownId or
// KOutOfRange (k must be in [1, rows - 1]).
std::vector<std::pair<std::string, double>> Nearest(const EmbeddingMatrix& m,
                                                    std::string_view id,
                                                    std::size_t k);

}  // namespace dqsel

#endif  // DQSEL_EMBEDDINGS_H_
