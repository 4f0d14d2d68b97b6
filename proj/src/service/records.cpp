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

#include <charconv>
#include <cmath>
#include <fstream>

#include "fisher_probe/error.hpp"
#include "fisher_probe/records.hpp"

namespace fisher_probe::records {

nlohmann::json score_record(const fim::FimResult& r, bool include_eigenvector) {
  nlohmann::json j{{"id", r.example_id},
                   {"label", r.label},
                   {"prediction", r.prediction},
                   {"probs", r.probs},
                   {"lambda_max", r.lambda_max},
                   {"eigenvalues", r.eigenvalues},
                   {"n_tokens", r.n_tokens},
                   {"lambda_max_per_token", r.lambda_max_per_token}};
  if (include_eigenvector) {
    j["top_eigenvector"] = r.top_eigenvector.values();
    j["top_eigenvector_shape"] = r.top_eigenvector.shape();
  }
  return j;
}

fim::FimResult parse_score_record(const nlohmann::json& j) {
  try {
    fim::FimResult r;
    r.example_id = j.at("id").get<std::string>();
    r.label = j.value("label", std::size_t{0});
    r.prediction = j.value("prediction", std::size_t{0});
    r.probs = j.value("probs", std::vector<double>{});
    r.lambda_max = j.at("lambda_max").get<double>();
    r.eigenvalues = j.value("eigenvalues", std::vector<double>{});
    r.n_tokens = j.value("n_tokens", std::size_t{0});
    r.lambda_max_per_token = j.value("lambda_max_per_token", 0.0);
    if (j.contains("top_eigenvector")) {
      auto values = j["top_eigenvector"].get<std::vector<double>>();
      auto shape = j.value("top_eigenvector_shape", Tensor::Shape{values.size()});
      r.top_eigenvector = Tensor(std::move(shape), std::move(values));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid scored record: ") + e.what());
  }
}

nlohmann::json pair_record(const probe::PairedRecord& r) {
  return {{"id", r.id},
          {"lambda_original", r.lambda_original},
          {"lambda_perturbed", r.lambda_perturbed},
          {"delta", r.delta},
          {"prediction_original", r.prediction_original},
          {"prediction_perturbed", r.prediction_perturbed},
          {"flipped", r.flipped},
          {"original_label", r.original_label},
          {"perturbed_label", r.perturbed_label}};
}

nlohmann::json delta_summary(const probe::DeltaStats& s, std::size_t failures) {
  return {{"count", s.count},
          {"failures", failures},
          {"mean", s.mean},
          {"std", s.std},
          {"threshold", s.threshold},
          {"frac_le_threshold", s.frac_le_threshold},
          {"frac_gt_threshold", s.frac_gt_threshold},
          {"mean_lambda_original", s.mean_lambda_original},
          {"mean_lambda_perturbed", s.mean_lambda_perturbed}};
}

nlohmann::json overlap_json(const probe::OverlapReport& r) {
  return {{"bins", r.bins},
          {"range_min", r.range_min},
          {"range_max", r.range_max},
          {"overlap_percent", r.overlap_percent},
          {"mass_a", r.mass_a},
          {"mass_b", r.mass_b}};
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::string histogram_csv(const probe::OverlapReport& r) {
  std::string out = "bin_left,bin_right,mass_a,mass_b\n";
  for (std::size_t i = 0; i < r.bins; ++i) {
    out += format_number(r.bin_left(i)) + ',' + format_number(r.bin_right(i)) + ',' + format_number(r.mass_a[i]) +
           ',' + format_number(r.mass_b[i]) + '\n';
  }
  return out;
}

std::vector<fim::FimResult> read_scored_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scored file " + path.string());
  std::vector<fim::FimResult> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    try {
      out.push_back(parse_score_record(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace fisher_probe::records
