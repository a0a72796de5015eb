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

#include "dqsel/http_api.h"

#include <algorithm>
#include <cctype>
#include <vector>

#include "dqsel/error.h"
#include "httplib.h"
#include "json_util.h"

namespace dqsel {

using internal::Json;

namespace {

std::vector<std::string> PathParts(const std::string& path) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (pos <= path.size()) {
    std::size_t end = path.find('/', pos);
    if (end == std::string::npos) end = path.size();
    if (end > pos) parts.push_back(path.substr(pos, end - pos));
    pos = end + 1;
  }
  return parts;
}

ApiResponse JsonResponse(int status, const std::string& body) {
  return {status, body, "application/json"};
}

ApiResponse ErrorResponse(ErrorCode code, const std::string& message) {
  Json j{{"error", ErrorCodeName(code)}, {"message", message}};
  return JsonResponse(HttpStatusFor(code), internal::Dump(j));
}

Json ParseBody(const std::string& body) {
  if (body.empty()) return Json::object();
  try {
    Json j = Json::parse(body);
    if (!j.is_object()) throw Error(ErrorCode::kMalformedRecord, "body must be a JSON object");
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedRecord, std::string("bad JSON body: ") + e.what());
  }
}

std::string StringMember(const Json& j, const char* key, bool required) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    if (required) throw Error(ErrorCode::kMalformedRecord, std::string("missing '") + key + "'");
    return {};
  }
  if (!it->is_string()) {
    throw Error(ErrorCode::kMalformedRecord, std::string("'") + key + "' must be a string");
  }
  return it->get<std::string>();
}

DraftInput DraftFromBody(const Json& j) {
  DraftInput in;
  auto fields = j.find("fields");
  if (fields == j.end() || !fields->is_object()) {
    throw Error(ErrorCode::kSchemaMismatch, "'fields' must be an object");
  }
  for (const auto& [name, value] : fields->items()) {
    if (!value.is_string()) {
      throw Error(ErrorCode::kSchemaMismatch, "field '" + name + "' must be a string");
    }
    in.fields[name] = value.get<std::string>();
  }
  in.label = StringMember(j, "label", true);
  if (auto s = StringMember(j, "split", false); !s.empty()) in.split = s;
  if (auto r = StringMember(j, "revises", false); !r.empty()) in.revises = r;
  return in;
}

ApiResponse Route(CreationService& svc, const ApiRequest& req) {
  auto parts = PathParts(req.path);
  const std::string& m = req.method;
  if (parts.empty() || parts[0] != "api") {
    return ErrorResponse(ErrorCode::kUnknownId, "no route " + req.path);
  }
  const TaskSchema& schema = svc.schema();
  auto term_level = [&] {
    auto it = req.query.find("granularity");
    return it != req.query.end() && it->second == "term";
  };
  auto record = [&](const DraftRecord& r) {
    return JsonResponse(200, r.ToJson(term_level(), &schema));
  };

  if (parts.size() == 2 && parts[1] == "drafts" && m == "POST") {
    return record(svc.PostDraft(DraftFromBody(ParseBody(req.body))));
  }
  if (parts.size() == 3 && parts[1] == "drafts" && m == "GET") {
    return record(svc.GetDraft(parts[2]));
  }
  if (parts.size() == 4 && parts[1] == "drafts" && parts[3] == "submit" && m == "POST") {
    Json j{{"sample_id", svc.Submit(parts[2])}};
    return JsonResponse(200, internal::Dump(j));
  }
  if (parts.size() == 4 && parts[1] == "drafts" && parts[3] == "discard" && m == "POST") {
    svc.Discard(parts[2]);
    return {204, "", "application/json"};
  }
  if (parts.size() == 2 && parts[1] == "queue" && m == "GET") {
    Json out = Json::array();
    for (const auto& r : svc.Queue()) {
      Json item;
      item["draft_id"] = r.draft_id;
      item["sample"] = internal::SampleToJson(r.sample, schema);
      item["report"] = Json::parse(r.report.ToJson(term_level()));
      out.push_back(std::move(item));
    }
    return JsonResponse(200, internal::Dump(out));
  }
  if (parts.size() == 4 && parts[1] == "samples" && parts[3] == "decision" && m == "POST") {
    Json j = ParseBody(req.body);
    Decision d;
    d.verdict = StringMember(j, "verdict", true);
    d.feedback = StringMember(j, "feedback", false);
    d.validator_id = StringMember(j, "validator_id", false);
    if (d.validator_id.empty()) {
      if (auto it = req.headers.find("x-validator-id"); it != req.headers.end()) {
        d.validator_id = it->second;
      }
    }
    return record(svc.Decide(parts[2], d));
  }
  if (parts.size() == 3 && parts[1] == "samples" && m == "GET") {
    return record(svc.GetSample(parts[2]));
  }
  if (parts.size() == 3 && parts[1] == "dataset" && parts[2] == "stats" && m == "GET") {
    return JsonResponse(200, svc.Stats().ToJson());
  }
  if (parts.size() == 2 && parts[1] == "schema" && m == "GET") {
    Json j{{"name", schema.name}, {"fields", schema.field_names}, {"labels", schema.labels}};
    return JsonResponse(200, internal::Dump(j));
  }
  Json j{{"error", "NotFound"}, {"message", m + " " + req.path}};
  return JsonResponse(404, internal::Dump(j));
}

}  // namespace

int HttpStatusFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingFeedback:
      return 422;
    case ErrorCode::kUnknownDraft:
    case ErrorCode::kUnknownSample:
    case ErrorCode::kUnknownId:
      return 404;
    case ErrorCode::kWrongState:
    case ErrorCode::kEmptyState:
      return 409;
    case ErrorCode::kSchemaMismatch:
    case ErrorCode::kUnknownLabel:
    case ErrorCode::kMalformedRecord:
    case ErrorCode::kInvalidConfig:
      return 400;
    default:
      return 500;
  }
}

ApiResponse HandleApiRequest(CreationService& svc, const ApiRequest& req) {
  try {
    return Route(svc, req);
  } catch (const Error& e) {
    return ErrorResponse(e.code(), e.what());
  } catch (const std::exception& e) {
    Json j{{"error", "Internal"}, {"message", e.what()}};
    return JsonResponse(500, internal::Dump(j));
  }
}

struct HttpServer::Impl {
  CreationService& svc;
  httplib::Server server;

  explicit Impl(CreationService& s) : svc(s) {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
      ApiRequest api;
      api.method = req.method;
      api.path = req.path;
      for (const auto& [k, v] : req.params) api.query[k] = v;
      for (const auto& [k, v] : req.headers) {
        std::string key = k;
        std::transform(key.begin(), key.end(), key.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        api.headers[key] = v;
      }
      api.body = req.body;
      ApiResponse out = HandleApiRequest(svc, api);
      res.status = out.status;
      if (out.status != 204) res.set_content(out.body, out.content_type);
    };
    const std::string pattern = R"(/api/.*)";
    server.Get(pattern, handler);
    server.Post(pattern, handler);
  }
};

HttpServer::HttpServer(CreationService& svc) : impl_(std::make_unique<Impl>(svc)) {}

HttpServer::~HttpServer() { Stop(); }

int HttpServer::Bind(const std::string& host, int port) {
  int bound = port == 0 ? impl_->server.bind_to_any_port(host)
                        : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) {
    throw Error(ErrorCode::kIoFailure, "cannot bind " + host + ":" + std::to_string(port));
  }
  return bound;
}

void HttpServer::Run() { impl_->server.listen_after_bind(); }

void HttpServer::Stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace dqsel
