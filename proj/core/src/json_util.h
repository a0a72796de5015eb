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

#ifndef DQSEL_SRC_JSON_UTIL_H_
#define DQSEL_SRC_JSON_UTIL_H_

#include <optional>
#include <string>

#include "dqsel/corpus.h"
#include "dqsel/error.h"
#include "json.hpp"

namespace dqsel::internal {

using Json = nlohmann::ordered_json;

Json SampleToJson(const Sample& sample, const TaskSchema& schema);

// Parses one record. Throws Error(kMalformedRecord) with `where` in the
// message for structural problems; does not check the label.
Sample SampleFromJson(const Json& j, const TaskSchema& schema,
                      const std::string& where);

// Canonical text form used for logs and snapshots.
inline std::string Dump(const Json& j) {
  return j.dump(-1, ' ', false, Json::error_handler_t::replace);
}

template <typename T>
T GetOr(const Json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->template get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig,
                std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace dqsel::internal

#endif  // DQSEL_SRC_JSON_UTIL_H_
