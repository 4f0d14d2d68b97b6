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

// JSON/CSV encodings shared by the CLI and the HTTP service. Every number
// either interface emits goes through these functions.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "fisher_probe/fim.hpp"
#include "fisher_probe/probe.hpp"

namespace fisher_probe::records {

/// {"id","label","prediction","probs","lambda_max","eigenvalues","n_tokens",
///  "lambda_max_per_token"} plus "top_eigenvector" when requested.
nlohmann::json score_record(const fim::FimResult& result, bool include_eigenvector = false);

/// Inverse of score_record for the fields it carries.
fim::FimResult parse_score_record(const nlohmann::json& record);

nlohmann::json pair_record(const probe::PairedRecord& record);
nlohmann::json delta_summary(const probe::DeltaStats& stats, std::size_t failures = 0);
nlohmann::json overlap_json(const probe::OverlapReport& report);

/// bin_left,bin_right,mass_a,mass_b
std::string histogram_csv(const probe::OverlapReport& report);

/// Shortest decimal text that round-trips; "inf"/"-inf"/"nan" otherwise.
std::string format_number(double value);

/// Reads a scored JSONL file written by `fisher_probe score`.
std::vector<fim::FimResult> read_scored_jsonl(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& content);

}  // namespace fisher_probe::records
