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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fisher_probe/models.hpp"
#include "fisher_probe/tensor.hpp"

namespace fisher_probe::datakit {

using Point2 = std::array<double, 2>;

/// One labeled example: either raw text or a 2-d point.
struct Example {
  std::string id;
  std::string text;
  std::optional<Point2> point;
  std::size_t label = 0;

  bool is_point() const { return point.has_value(); }
  bool operator==(const Example&) const = default;
};

struct PairedExample {
  std::string id;
  std::string original_text;
  std::string perturbed_text;
  std::size_t original_label = 0;
  std::size_t perturbed_label = 0;
};

/// Class names indexed by class id. Always explicit, never inferred.
class LabelMap {
 public:
  LabelMap() = default;
  explicit LabelMap(std::vector<std::string> names);
  /// Comma-separated names, e.g. "neg,pos".
  static LabelMap parse(std::string_view csv);

  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t id) const { return names_.at(id); }
  /// Class id of `name`; a decimal id in range is accepted too.
  std::size_t id(std::string_view name) const;
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
};

// Tokenization: lowercase ASCII, "<br />"-style HTML breaks removed, each
// ASCII punctuation character its own token, whitespace separates words.
std::vector<std::string> tokenize(std::string_view text);
std::string join_tokens(std::span<const std::string> tokens);

/// Whitespace-separated text embeddings: "token v1 ... vd" per line.
/// The dimension is taken from the first line.
models::EmbeddingTable load_embeddings(const std::filesystem::path& path);

enum class DatasetFormat { kJsonl, kTsv };
DatasetFormat parse_format(std::string_view name);

/// TSV "label<TAB>text" or JSONL {"id"?, "text" | "point", "label"}.
/// Records keep file order; missing ids become the record index.
std::vector<Example> load_dataset(const std::filesystem::path& path, DatasetFormat format, const LabelMap& labels);

/// JSONL {"id"?, "original_text", "perturbed_text", "original_label",
/// "perturbed_label"}.
std::vector<PairedExample> load_pairs(const std::filesystem::path& path, const LabelMap& labels);

struct GaussianMixtureSpec {
  Point2 mu1{-2.0, -2.0};
  Point2 mu2{3.5, 3.5};
  std::array<double, 4> sigma1{1.0, 0.0, 0.0, 1.0};  // row-major 2x2
  std::array<double, 4> sigma2{2.0, 1.0, 1.0, 2.0};
  std::size_t n_per_class = 500;
  std::uint64_t seed = 0;
};

/// Lower-triangular Cholesky factor of a row-major n x n symmetric
/// positive definite matrix. Throws InvalidArgument otherwise.
std::vector<double> cholesky(std::span<const double> matrix, std::size_t n);

/// Class 0 points come first ("g0-<i>"), then class 1 ("g1-<i>").
std::vector<Example> sample_mixture(const GaussianMixtureSpec& spec);

/// Network input for one example.
struct EncodedInput {
  Tensor x;
  std::vector<std::uint8_t> mask;  // 1 per input coordinate that is not padding
  std::vector<std::string> tokens; // text only, after truncation
  std::size_t n_tokens = 0;        // real tokens (text) or coordinates (point)
};

/// A model together with what it needs to turn examples into inputs.
struct Classifier {
  models::Model model;
  std::shared_ptr<const models::EmbeddingTable> embeddings;  // textcnn only

  /// Throws InvalidArgument on empty tokenization or a kind mismatch.
  EncodedInput encode(const Example& example) const;
  EncodedInput encode_tokens(std::span<const std::string> tokens) const;
};

}  // namespace fisher_probe::datakit
