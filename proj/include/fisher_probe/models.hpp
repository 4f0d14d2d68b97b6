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
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "fisher_probe/autograd.hpp"
#include "fisher_probe/tensor.hpp"

namespace fisher_probe::models {

/// Frozen word-embedding lookup table.
///
/// Rows are the loaded vectors in file order followed by a PAD row (all
/// zeros) and an UNK row (mean of the loaded rows).
struct EmbeddingTable {
  std::size_t dim = 0;
  std::unordered_map<std::string, std::size_t> vocab;
  std::vector<std::string> tokens;  // row -> token, loaded rows only
  Tensor matrix;                    // rows x dim
  std::size_t pad_row = 0;
  std::size_t unk_row = 0;

  std::size_t rows() const { return matrix.empty() ? 0 : matrix.dim(0); }
  /// Row index of `token`, or unk_row when out of vocabulary.
  std::size_t lookup(const std::string& token) const;
  /// FNV-1a digest over the tokens and raw vector bytes.
  std::uint64_t fingerprint() const;
};

/// Builds a table from loaded (token, vector) rows, appending PAD and UNK.
EmbeddingTable make_embedding_table(std::vector<std::string> tokens, std::vector<double> values, std::size_t dim);

/// n x d matrix of rows for `ids`. Throws on an empty id list or an id
/// outside the table.
Tensor embed(std::span<const std::size_t> ids, const EmbeddingTable& table);

enum class ModelKind { kMlp, kTextCnn };
enum class Activation { kTanh, kRelu };

struct ModelSpec {
  ModelKind kind = ModelKind::kMlp;
  std::size_t num_classes = 2;

  // mlp: widths including input and output, e.g. {2, 16, 2}.
  std::vector<std::size_t> layer_widths{2, 16, 2};
  Activation activation = Activation::kTanh;

  // textcnn
  std::size_t embedding_dim = 50;
  std::vector<std::size_t> filter_widths{3, 4, 5};
  std::size_t filters_per_width = 100;
  double dropout = 0.5;
  bool conv_bias = true;
  std::size_t max_tokens = 400;

  bool operator==(const ModelSpec&) const = default;
};

/// 2 -> 16 -> 2 tanh network for the two-Gaussian task.
ModelSpec default_mlp_spec();
/// Widths {3,4,5} x 100 filters, ReLU, max-over-time, dropout 0.5.
ModelSpec default_textcnn_spec(std::size_t embedding_dim = 50, std::size_t num_classes = 2);

/// Throws InvalidArgument describing the first violated constraint.
void validate(const ModelSpec& spec);

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const nlohmann::json& j);

/// Architecture, graph and parameters. Immutable once trained.
struct Model {
  ModelSpec spec;
  autograd::Graph graph;
  autograd::ParamSet params;

  std::size_t num_classes() const { return spec.num_classes; }
  std::size_t parameter_count() const { return params.scalar_count(); }
  /// Smallest admissible number of input rows (textcnn) or 1 (mlp).
  std::size_t min_input_rows() const;
};

/// Graph for `spec` wired to parameters laid out as build_model does.
autograd::Graph build_graph(const ModelSpec& spec);

/// Glorot-uniform weights and zero biases drawn from `seed`.
Model build_model(const ModelSpec& spec, std::uint64_t seed);

/// Rebuilds the graph for `spec` around existing parameters.
Model assemble_model(const ModelSpec& spec, autograd::ParamSet params);

// Checkpoint container.
//
//   offset 0   8 bytes   magic "FPROBECK"
//   offset 8   u32 LE    format version (1)
//   offset 12  u64 LE    header length H
//   offset 20  H bytes   UTF-8 JSON header:
//                        {"spec":{...}, "vocab_hash":"<16 hex>" | null,
//                         "metadata":{...},
//                         "tensors":[{"name":..., "shape":[...]}, ...]}
//   then, for each tensor in header order, its values as f64 LE.
inline constexpr char kCheckpointMagic[8] = {'F', 'P', 'R', 'O', 'B', 'E', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Model model;
  std::optional<std::uint64_t> vocab_hash;
  nlohmann::json metadata = nlohmann::json::object();
};

std::string encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::string_view bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// FNV-1a 64-bit digest.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

}  // namespace fisher_probe::models
