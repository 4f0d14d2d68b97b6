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

#include "fisher_probe/service.hpp"

#include <algorithm>
#include <charconv>

#include <httplib.h>

#include "fisher_probe/error.hpp"
#include "fisher_probe/probe.hpp"
#include "fisher_probe/records.hpp"

namespace fisher_probe::service {

namespace {

Response error(int status, std::string message) { return {status, {{"error", std::move(message)}}}; }

// Maps an exception thrown while handling a request onto a status code.
Response from_exception(const std::exception_ptr& ep) {
  try {
    std::rethrow_exception(ep);
  } catch (const EmptyInputError& e) {
    return error(422, e.what());
  } catch (const InvalidArgument& e) {
    return error(422, e.what());
  } catch (const nlohmann::json::exception& e) {
    return error(400, std::string("malformed request body: ") + e.what());
  } catch (...) {
    return error(500, "internal error");
  }
}

nlohmann::json parse_body(std::string_view body) {
  nlohmann::json j = nlohmann::json::parse(body);
  if (!j.is_object()) throw nlohmann::json::type_error::create(302, "request body must be a JSON object", nullptr);
  return j;
}

datakit::Example request_example(const nlohmann::json& j, std::string id) {
  datakit::Example ex;
  ex.id = std::move(id);
  if (j.contains("point")) {
    const auto p = j.at("point").get<std::vector<double>>();
    if (p.size() != 2) throw InvalidArgument("point must have 2 coordinates");
    ex.point = datakit::Point2{p[0], p[1]};
  } else {
    ex.text = j.at("text").get<std::string>();
  }
  return ex;
}

nlohmann::json live_view(const fim::FimResult& r, const std::vector<std::string>& tokens) {
  return {{"probs", r.probs},
          {"prediction", r.prediction},
          {"lambda_max", r.lambda_max},
          {"eigenvalues", r.eigenvalues},
          {"n_tokens", r.n_tokens},
          {"tokens", tokens}};
}

std::optional<std::size_t> parse_size(const std::string& text) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return v;
}

void reply(httplib::Response& res, const Response& r) {
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json");
}

}  // namespace

Service::Service(datakit::Classifier classifier, std::vector<datakit::Example> dataset, std::string model_hash,
                 std::vector<fim::FimResult> precomputed)
    : classifier_(std::move(classifier)), dataset_(std::move(dataset)), model_hash_(std::move(model_hash)) {
  for (std::size_t i = 0; i < dataset_.size(); ++i) {
    if (!index_.emplace(dataset_[i].id, i).second) throw InvalidArgument("duplicate example id '" + dataset_[i].id + "'");
  }
  if (!precomputed.empty()) {
    std::unordered_map<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < precomputed.size(); ++i) by_id.emplace(precomputed[i].example_id, i);
    scores_.resize(dataset_.size());
    for (std::size_t i = 0; i < dataset_.size(); ++i) {
      scores_[i].id = dataset_[i].id;
      const auto it = by_id.find(dataset_[i].id);
      if (it != by_id.end()) scores_[i].result = precomputed[it->second];
      else scores_[i].error = "no precomputed score";
    }
  } else if (!dataset_.empty()) {
    scores_ = fim::score_dataset(classifier_, dataset_);
  }
  for (std::size_t i = 0; i < scores_.size(); ++i) {
    if (scores_[i].ok()) by_lambda_desc_.push_back(i);
  }
  std::stable_sort(by_lambda_desc_.begin(), by_lambda_desc_.end(), [&](std::size_t a, std::size_t b) {
    return scores_[a].result->lambda_max > scores_[b].result->lambda_max;
  });
}

Response Service::list_examples(std::string_view sort, std::size_t offset, std::size_t limit) const {
  if (sort != "lambda_desc" && sort != "lambda_asc") {
    return error(400, "sort must be lambda_desc or lambda_asc");
  }
  if (limit == 0 || limit > 1000) return error(400, "limit must lie in [1, 1000]");
  const std::size_t total = by_lambda_desc_.size();
  nlohmann::json items = nlohmann::json::array();
  for (std::size_t k = offset; k < total && k < offset + limit; ++k) {
    const std::size_t pos = sort == "lambda_desc" ? k : total - 1 - k;
    const std::size_t i = by_lambda_desc_[pos];
    auto rec = records::score_record(*scores_[i].result);
    rec["text"] = dataset_[i].text;
    items.push_back(std::move(rec));
  }
  return {200, {{"total", total}, {"offset", offset}, {"limit", limit}, {"sort", sort}, {"examples", items}}};
}

nlohmann::json Service::example_view(const fim::FimResult& result, const datakit::EncodedInput& input) const {
  auto rec = records::score_record(result);
  rec["tokens"] = input.tokens;
  return rec;
}

Response Service::get_example(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) return error(404, "unknown example id '" + std::string(id) + "'");
  const std::size_t i = it->second;
  if (!scores_[i].ok()) return error(422, scores_[i].error);
  try {
    const auto& ex = dataset_[i];
    const auto& result = *scores_[i].result;
    const auto input = classifier_.encode(ex);
    auto view = example_view(result, input);
    view["text"] = ex.text;
    const auto attr = probe::integrated_gradients(classifier_, ex, result.prediction, attribution_steps);
    view["attribution"] = {{"token_scores", attr.token_scores},
                           {"target_class", attr.target_class},
                           {"steps", attr.steps},
                           {"output_delta", attr.output_delta},
                           {"completeness_residual", attr.completeness_residual}};
    return {200, view};
  } catch (...) {
    return from_exception(std::current_exception());
  }
}

Response Service::score(std::string_view body) const {
  try {
    const auto j = parse_body(body);
    const datakit::Example ex = request_example(j, "request");
    const auto input = classifier_.encode(ex);
    const fim::FimResult r = fim::lambda_max(classifier_, ex);
    return {200, live_view(r, input.tokens)};
  } catch (...) {
    return from_exception(std::current_exception());
  }
}

Response Service::perturb(std::string_view body) const {
  try {
    const auto j = parse_body(body);
    const datakit::Example original = request_example(j, "original");
    probe::SubstitutionSpec subs;
    if (j.contains("substitutions")) {
      for (const auto& s : j.at("substitutions")) {
        subs.push_back({s.at("position").get<std::size_t>(), s.at("replacement").get<std::string>()});
      }
    }
    datakit::Example perturbed = probe::apply_substitutions(original, subs);
    perturbed.id = "perturbed";
    const auto in_a = classifier_.encode(original);
    const auto in_b = classifier_.encode(perturbed);
    const fim::FimResult a = fim::lambda_max(classifier_, original);
    const fim::FimResult b = fim::lambda_max(classifier_, perturbed);
    return {200,
            {{"original", live_view(a, in_a.tokens)},
             {"perturbed", live_view(b, in_b.tokens)},
             {"delta", b.lambda_max - a.lambda_max},
             {"flipped", a.prediction != b.prediction}}};
  } catch (...) {
    return from_exception(std::current_exception());
  }
}

Response Service::health() const {
  return {200, {{"status", "ok"}, {"model_hash", model_hash_}, {"examples", dataset_.size()}}};
}

void Service::mount(httplib::Server& server) const {
  server.Get("/health", [this](const httplib::Request&, httplib::Response& res) { reply(res, health()); });
  server.Get("/examples", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string sort = req.has_param("sort") ? req.get_param_value("sort") : "lambda_desc";
    std::size_t offset = 0;
    std::size_t limit = 50;
    if (req.has_param("offset")) {
      const auto v = parse_size(req.get_param_value("offset"));
      if (!v) return reply(res, error(400, "offset must be a non-negative integer"));
      offset = *v;
    }
    if (req.has_param("limit")) {
      const auto v = parse_size(req.get_param_value("limit"));
      if (!v) return reply(res, error(400, "limit must be a non-negative integer"));
      limit = *v;
    }
    reply(res, list_examples(sort, offset, limit));
  });
  server.Get(R"(/examples/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
    reply(res, get_example(req.matches[1].str()));
  });
  server.Post("/score", [this](const httplib::Request& req, httplib::Response& res) { reply(res, score(req.body)); });
  server.Post("/perturb",
              [this](const httplib::Request& req, httplib::Response& res) { reply(res, perturb(req.body)); });
}

void run_server(const Service& service, const std::string& host, int port) {
  if (port <= 0 || port > 65535) throw InvalidArgument("port must lie in [1, 65535]");
  httplib::Server server;
  service.mount(server);
  if (!server.listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace fisher_probe::service
