// Copyright 2026 The Fisher Probe Authors
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

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "fisher_probe/datakit.hpp"
#include "fisher_probe/fim.hpp"

namespace httplib {
class Server;
}

namespace fisher_probe::service {

struct Response {
  int status = 200;
  nlohmann::json body;
};

/// Stateless scoring service behind the explorer UI.
///
/// Dataset scores are computed once at construction; /score and /perturb
/// run on demand against the same immutable classifier, so concurrent
/// requests share no mutable state.
class Service {
 public:
  Service(datakit::Classifier classifier, std::vector<datakit::Example> dataset, std::string model_hash,
          std::vector<fim::FimResult> precomputed = {});

  /// GET /examples?sort=lambda_desc|lambda_asc&offset&limit
  Response list_examples(std::string_view sort, std::size_t offset, std::size_t limit) const;
  /// GET /examples/{id}: score record, tokens and IG attribution.
  Response get_example(std::string_view id) const;
  /// POST /score {"text"} or {"point":[x,y]}
  Response score(std::string_view body) const;
  /// POST /perturb {"text", "substitutions":[{"position","replacement"}]}
  Response perturb(std::string_view body) const;
  /// GET /health
  Response health() const;

  /// Registers every route on `server`.
  void mount(httplib::Server& server) const;

  std::size_t dataset_size() const { return dataset_.size(); }
  std::size_t attribution_steps = 128;

 private:
  nlohmann::json example_view(const fim::FimResult& result, const datakit::EncodedInput& input) const;

  datakit::Classifier classifier_;
  std::vector<datakit::Example> dataset_;
  std::string model_hash_;
  std::vector<fim::ScoreEntry> scores_;
  std::vector<std::size_t> by_lambda_desc_;  // indices of scored entries
  std::unordered_map<std::string, std::size_t> index_;
};

/// Blocks serving `service` on host:port until the process is stopped.
void run_server(const Service& service, const std::string& host, int port);

}  // namespace fisher_probe::service
