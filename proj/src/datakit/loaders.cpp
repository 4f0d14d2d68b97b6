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

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "fisher_probe/datakit.hpp"
#include "fisher_probe/error.hpp"

namespace fisher_probe::datakit {

namespace {

std::ifstream open_text(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw IoError(std::string("cannot open ") + what + " file " + path.string());
  return in;
}

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

std::string_view trim_cr(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.remove_suffix(1);
  return s;
}

bool blank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

std::size_t label_field(const nlohmann::json& value, const LabelMap& labels) {
  if (value.is_string()) return labels.id(value.get<std::string>());
  if (value.is_number_unsigned() || value.is_number_integer()) {
    const auto v = value.get<long long>();
    if (v < 0 || static_cast<std::size_t>(v) >= labels.size()) {
      throw InvalidArgument("label " + std::to_string(v) + " out of range for " + std::to_string(labels.size()) +
                            " classes");
    }
    return static_cast<std::size_t>(v);
  }
  throw InvalidArgument("label must be a string or integer");
}

const nlohmann::json& required(const nlohmann::json& record, const char* field) {
  const auto it = record.find(field);
  if (it == record.end()) throw InvalidArgument(std::string("missing field '") + field + "'");
  return *it;
}

std::string id_field(const nlohmann::json& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_number_integer()) return std::to_string(value.get<long long>());
  throw InvalidArgument("id must be a string or integer");
}

}  // namespace

LabelMap::LabelMap(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.size() < 2) throw InvalidArgument("a label map needs at least 2 classes");
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw InvalidArgument("label names must not be empty");
    if (!seen.insert(n).second) throw InvalidArgument("duplicate label name '" + n + "'");
  }
}

LabelMap LabelMap::parse(std::string_view csv) {
  std::vector<std::string> names;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t comma = csv.find(',', start);
    const std::size_t end = comma == std::string_view::npos ? csv.size() : comma;
    std::string_view name = csv.substr(start, end - start);
    while (!name.empty() && std::isspace(static_cast<unsigned char>(name.front()))) name.remove_prefix(1);
    while (!name.empty() && std::isspace(static_cast<unsigned char>(name.back()))) name.remove_suffix(1);
    names.emplace_back(name);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return LabelMap(std::move(names));
}

std::size_t LabelMap::id(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  std::size_t numeric = 0;
  const auto [ptr, ec] = std::from_chars(name.data(), name.data() + name.size(), numeric);
  if (ec == std::errc() && ptr == name.data() + name.size() && !name.empty() && numeric < names_.size()) {
    return numeric;
  }
  std::string valid;
  for (std::size_t i = 0; i < names_.size(); ++i) valid += (i ? ", " : "") + names_[i];
  throw InvalidArgument("unknown label '" + std::string(name) + "'; valid labels: " + valid);
}

models::EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  auto in = open_text(path, "embedding");
  std::vector<std::string> tokens;
  std::vector<double> values;
  std::size_t dim = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim_cr(line);
    if (blank(view)) continue;
    const auto cols = split_ws(view);
    if (dim == 0) {
      if (cols.size() < 2) throw ParseError(where(path, line_no) + "expected a token followed by at least one value");
      dim = cols.size() - 1;
    } else if (cols.size() != dim + 1) {
      throw ParseError(where(path, line_no) + "expected " + std::to_string(dim) + " values, found " +
                       std::to_string(cols.size() - 1));
    }
    for (std::size_t j = 1; j < cols.size(); ++j) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cols[j].data(), cols[j].data() + cols[j].size(), v);
      if (ec != std::errc() || ptr != cols[j].data() + cols[j].size() || !std::isfinite(v)) {
        throw ParseError(where(path, line_no) + "invalid number '" + std::string(cols[j]) + "'");
      }
      values.push_back(v);
    }
    tokens.emplace_back(cols[0]);
  }
  if (tokens.empty()) throw ParseError(path.string() + ": no embedding rows");
  return models::make_embedding_table(std::move(tokens), std::move(values), dim);
}

DatasetFormat parse_format(std::string_view name) {
  if (name == "jsonl") return DatasetFormat::kJsonl;
  if (name == "tsv") return DatasetFormat::kTsv;
  throw InvalidArgument("unknown dataset format '" + std::string(name) + "' (expected jsonl or tsv)");
}

std::vector<Example> load_dataset(const std::filesystem::path& path, DatasetFormat format, const LabelMap& labels) {
  auto in = open_text(path, "dataset");
  std::vector<Example> out;
  std::unordered_set<std::string> explicit_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim_cr(line);
    if (blank(view)) continue;
    Example ex;
    bool has_id = false;
    try {
      if (format == DatasetFormat::kTsv) {
        const std::size_t tab = view.find('\t');
        if (tab == std::string_view::npos) throw InvalidArgument("expected 'label<TAB>text'");
        ex.label = labels.id(view.substr(0, tab));
        ex.text = std::string(view.substr(tab + 1));
      } else {
        const auto record = nlohmann::json::parse(view);
        if (!record.is_object()) throw InvalidArgument("record must be a JSON object");
        ex.label = label_field(required(record, "label"), labels);
        if (const auto it = record.find("point"); it != record.end()) {
          const auto p = it->get<std::vector<double>>();
          if (p.size() != 2) throw InvalidArgument("point must have 2 coordinates");
          ex.point = Point2{p[0], p[1]};
        } else {
          ex.text = required(record, "text").get<std::string>();
        }
        if (const auto it = record.find("id"); it != record.end() && !it->is_null()) {
          ex.id = id_field(*it);
          has_id = true;
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where(path, line_no) + e.what());
    } catch (const InvalidArgument& e) {
      throw ParseError(where(path, line_no) + e.what());
    }
    if (has_id) {
      if (!explicit_ids.insert(ex.id).second) throw ParseError(where(path, line_no) + "duplicate id '" + ex.id + "'");
    } else {
      ex.id = std::to_string(out.size());
    }
    out.push_back(std::move(ex));
  }
  // Generated ids may collide with explicit ones.
  std::unordered_set<std::string> all;
  for (const auto& ex : out) {
    if (!all.insert(ex.id).second) throw ParseError(path.string() + ": duplicate id '" + ex.id + "'");
  }
  return out;
}

std::vector<PairedExample> load_pairs(const std::filesystem::path& path, const LabelMap& labels) {
  auto in = open_text(path, "pairs");
  std::vector<PairedExample> out;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim_cr(line);
    if (blank(view)) continue;
    PairedExample pair;
    try {
      const auto record = nlohmann::json::parse(view);
      if (!record.is_object()) throw InvalidArgument("record must be a JSON object");
      pair.original_text = required(record, "original_text").get<std::string>();
      pair.perturbed_text = required(record, "perturbed_text").get<std::string>();
      pair.original_label = label_field(required(record, "original_label"), labels);
      pair.perturbed_label = label_field(required(record, "perturbed_label"), labels);
      const auto it = record.find("id");
      pair.id = it != record.end() && !it->is_null() ? id_field(*it) : std::to_string(out.size());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where(path, line_no) + e.what());
    } catch (const InvalidArgument& e) {
      throw ParseError(where(path, line_no) + e.what());
    }
    if (!ids.insert(pair.id).second) throw ParseError(where(path, line_no) + "duplicate id '" + pair.id + "'");
    out.push_back(std::move(pair));
  }
  return out;
}

}  // namespace fisher_probe::datakit
