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

#ifndef DQSEL_HTTP_API_H_
#define DQSEL_HTTP_API_H_

#include <map>
#include <memory>
#include <string>

#include "dqsel/error.h"
#include "dqsel/service.h"

namespace dqsel {

struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::map<std::string, std::string> headers;  // lower-case names
  std::string body;
};

struct ApiResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

// Routes one request of the JSON API:
//   POST /api/drafts[?granularity=term]     GET  /api/drafts/{id}
//   POST /api/drafts/{id}/submit            POST /api/drafts/{id}/discard
//   GET  /api/queue                         POST /api/samples/{id}/decision
//   GET  /api/samples/{id}                  GET  /api/dataset/stats
//   GET  /api/schema
// Errors come back as {"error": <code name>, "message": ...}.
ApiResponse HandleApiRequest(CreationService& svc, const ApiRequest& req);

int HttpStatusFor(ErrorCode code);

// cpp-httplib front end for HandleApiRequest.
class HttpServer {
 public:
  explicit HttpServer(CreationService& svc);
  ~HttpServer();

  // Port 0 picks a free port. Returns the bound port; throws IoFailure.
  int Bind(const std::string& host, int port);
  // Serves until Stop().
  void Run();
  void Stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dqsel

#endif  // DQSEL_HTTP_API_H_
