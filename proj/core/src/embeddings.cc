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

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "dqsel/error.h"
#include "json_util.h"

namespace dqsel {

using internal::Json;

namespace {

constexpr char kMagic[4] = {'E', 'M', 'B', '1'};
constexpr std::size_t kHeaderSize = 4 + 4 + 8 + 4;

static_assert(std::endian::native == std::endian::little,
              "EMB1 codec assumes a little-endian host");

template <typename T>
void PutLe(std::string& out, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.append(bytes, sizeof(T));
}

template <typename T>
T GetLe(std::string_view bytes, std::size_t offset) {
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  return value;
}

std::string ReadBinary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(std::size_t dim, std::vector<float> values,
                                 std::vector<std::string> order)
    : dim_(dim), values_(std::move(values)), order_(std::move(order)) {
  if (dim_ == 0) throw Error(ErrorCode::kInvariantViolation, "dim must be >= 1");
  if (values_.size() != order_.size() * dim_) {
    throw Error(ErrorCode::kInvariantViolation, "value count != rows * dim");
  }
  for (float v : values_) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kInvariantViolation, "embedding contains NaN or Inf");
    }
  }
  index_.reserve(order_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) {
    if (!index_.emplace(order_[i], i).second) {
      throw Error(ErrorCode::kInvariantViolation, "duplicate id " + order_[i]);
    }
  }
}

std::optional<std::size_t> EmbeddingMatrix::Find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool EmbeddingMatrix::operator==(const EmbeddingMatrix& other) const {
  if (dim_ != other.dim_ || order_ != other.order_) return false;
  // Bitwise, so -0.0f and 0.0f differ.
  return values_.size() == other.values_.size() &&
         std::memcmp(values_.data(), other.values_.data(),
                     values_.size() * sizeof(float)) == 0;
}

std::filesystem::path ManifestPath(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".manifest.json");
}

std::string EncodeEmb(const EmbeddingMatrix& m) {
  std::string out;
  out.reserve(kHeaderSize + m.values().size() * sizeof(float));
  out.append(kMagic, 4);
  PutLe<std::uint32_t>(out, kEmbVersion);
  PutLe<std::uint64_t>(out, m.rows());
  PutLe<std::uint32_t>(out, static_cast<std::uint32_t>(m.dim()));
  out.append(reinterpret_cast<const char*>(m.values().data()),
             m.values().size() * sizeof(float));
  return out;
}

EmbHeader DecodeEmbHeader(std::string_view bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::kBadMagic, "not an EMB1 file");
  }
  if (bytes.size() < kHeaderSize) {
    throw Error(ErrorCode::kTruncatedFile, "header shorter than 20 bytes");
  }
  EmbHeader h;
  h.version = GetLe<std::uint32_t>(bytes, 4);
  h.rows = GetLe<std::uint64_t>(bytes, 8);
  h.dim = GetLe<std::uint32_t>(bytes, 16);
  if (h.version != kEmbVersion) {
    throw Error(ErrorCode::kVersionMismatch,
                "version " + std::to_string(h.version) + " != 1");
  }
  return h;
}

void WriteEmb(const EmbeddingMatrix& m, const EmbManifest& manifest,
              const std::filesystem::path& path) {
  if (manifest.order != m.order()) {
    throw Error(ErrorCode::kInvariantViolation, "manifest order != matrix order");
  }
  if (manifest.dim != m.dim()) {
    throw Error(ErrorCode::kInvariantViolation, "manifest dim != matrix dim");
  }
  std::set<std::string> ordered(manifest.order.begin(), manifest.order.end());
  for (const auto& id : manifest.burned) {
    if (ordered.contains(id)) {
      throw Error(ErrorCode::kInvariantViolation, "burned id in order: " + id);
    }
  }
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + path.string());
    std::string bytes = EncodeEmb(m);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kIoFailure, "write failed: " + path.string());
  }
  Json j;
  j["order"] = manifest.order;
  j["burned"] = manifest.burned;
  j["source"] = manifest.source;
  j["dim"] = manifest.dim;
  std::ofstream out(ManifestPath(path), std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write manifest");
  out << internal::Dump(j) << '\n';
  if (!out) throw Error(ErrorCode::kIoFailure, "manifest write failed");
}

std::pair<EmbeddingMatrix, EmbManifest> ReadEmb(const std::filesystem::path& path) {
  std::string bytes = ReadBinary(path);
  EmbHeader header = DecodeEmbHeader(bytes);

  EmbManifest manifest;
  {
    std::string text = ReadBinary(ManifestPath(path));
    Json j;
    try {
      j = Json::parse(text);
      manifest.order = j.at("order").get<std::vector<std::string>>();
      manifest.burned = j.at("burned").get<std::vector<std::string>>();
      manifest.source = j.value("source", std::string());
      manifest.dim = j.at("dim").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kInvariantViolation,
                  "bad manifest " + ManifestPath(path).string() + ": " + e.what());
    }
  }
  if (manifest.dim != header.dim) {
    throw Error(ErrorCode::kDimMismatch,
                "manifest dim " + std::to_string(manifest.dim) + " vs header dim " +
                    std::to_string(header.dim));
  }
  if (manifest.order.size() != header.rows) {
    throw Error(ErrorCode::kInvariantViolation,
                "manifest lists " + std::to_string(manifest.order.size()) +
                    " ids for " + std::to_string(header.rows) + " rows");
  }
  if (header.dim == 0) throw Error(ErrorCode::kInvariantViolation, "dim is 0");
  std::uint64_t available = bytes.size() - kHeaderSize;
  if (header.rows > available / (std::uint64_t{header.dim} * sizeof(float))) {
    throw Error(ErrorCode::kTruncatedFile, "payload shorter than rows * dim");
  }
  std::uint64_t payload = header.rows * header.dim * sizeof(float);
  if (available < payload) {
    throw Error(ErrorCode::kTruncatedFile, "payload shorter than rows * dim");
  }
  if (available > payload) {
    throw Error(ErrorCode::kInvariantViolation, "trailing bytes after payload");
  }
  std::vector<float> values(header.rows * header.dim);
  std::memcpy(values.data(), bytes.data() + kHeaderSize, payload);
  EmbeddingMatrix m(header.dim, std::move(values), manifest.order);
  std::set<std::string> ordered(manifest.order.begin(), manifest.order.end());
  for (const auto& id : manifest.burned) {
    if (ordered.contains(id)) {
      throw Error(ErrorCode::kInvariantViolation, "burned id in order: " + id);
    }
  }
  return {std::move(m), std::move(manifest)};
}

namespace {

template <typename T>
double CosineImpl(std::span<const T> u, std::span<const T> v) {
  if (u.size() != v.size()) {
    throw Error(ErrorCode::kDimMismatch, "cosine of vectors of different length");
  }
  double dot = 0.0;
  double nu = 0.0;
  double nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    double a = u[i];
    double b = v[i];
    dot += a * b;
    nu += a * a;
    nv += b * b;
  }
  if (nu == 0.0 || nv == 0.0) return 0.0;
  double c = dot / (std::sqrt(nu) * std::sqrt(nv));
  return std::clamp(c, -1.0, 1.0);
}

}  // namespace

double Cosine(std::span<const float> u, std::span<const float> v) {
  return CosineImpl(u, v);
}

double Cosine(std::span<const double> u, std::span<const double> v) {
  return CosineImpl(u, v);
}

std::vector<std::pair<std::string, double>> Nearest(const EmbeddingMatrix& m,
                                                    std::string_view id,
                                                    std::size_t k) {
  auto query = m.Find(id);
  if (!query) throw Error(ErrorCode::kUnknownId, std::string(id));
  if (k < 1 || k >= m.rows()) {
    throw Error(ErrorCode::kKOutOfRange,
                "k=" + std::to_string(k) + " with " + std::to_string(m.rows()) + " rows");
  }
  std::vector<std::pair<std::string, double>> scored;
  scored.reserve(m.rows() - 1);
  auto q = m.Row(*query);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    if (i == *query) continue;
    scored.emplace_back(m.order()[i], Cosine(q, m.Row(i)));
  }
  auto better = [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k),
                    scored.end(), better);
  scored.resize(k);
  return scored;
}

}  // namespace dqsel
