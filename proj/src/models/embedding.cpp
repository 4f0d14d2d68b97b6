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

#include <cstring>

#include "fisher_probe/error.hpp"
#include "fisher_probe/models.hpp"

namespace fisher_probe::models {

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[value & 0xf];
    value >>= 4;
  }
  return out;
}

EmbeddingTable make_embedding_table(std::vector<std::string> tokens, std::vector<double> values, std::size_t dim) {
  if (dim == 0) throw InvalidArgument("embedding dimension must be positive");
  if (values.size() != tokens.size() * dim) throw ShapeError("embedding values do not match token count x dim");
  EmbeddingTable table;
  table.dim = dim;
  const std::size_t loaded = tokens.size();
  std::vector<double> mean(dim, 0.0);
  for (std::size_t r = 0; r < loaded; ++r) {
    for (std::size_t j = 0; j < dim; ++j) mean[j] += values[r * dim + j];
  }
  if (loaded > 0) {
    for (double& m : mean) m /= static_cast<double>(loaded);
  }
  values.resize(values.size() + dim, 0.0);  // PAD
  values.insert(values.end(), mean.begin(), mean.end());
  table.pad_row = loaded;
  table.unk_row = loaded + 1;
  table.matrix = Tensor({loaded + 2, dim}, std::move(values));
  for (std::size_t r = 0; r < loaded; ++r) {
    // First occurrence wins for duplicated tokens.
    table.vocab.emplace(tokens[r], r);
  }
  table.tokens = std::move(tokens);
  return table;
}

std::size_t EmbeddingTable::lookup(const std::string& token) const {
  const auto it = vocab.find(token);
  return it == vocab.end() ? unk_row : it->second;
}

std::uint64_t EmbeddingTable::fingerprint() const {
  std::uint64_t h = fnv1a(std::to_string(dim));
  for (const auto& t : tokens) {
    h = fnv1a(t, h);
    h = fnv1a(std::string_view("\n", 1), h);
  }
  const auto data = matrix.data();
  h = fnv1a(std::string_view(reinterpret_cast<const char*>(data.data()), data.size() * sizeof(double)), h);
  return h;
}

Tensor embed(std::span<const std::size_t> ids, const EmbeddingTable& table) {
  if (ids.empty()) throw InvalidArgument("cannot embed an empty token sequence");
  const std::size_t d = table.dim;
  Tensor out({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= table.rows()) {
      throw InvalidArgument("token id " + std::to_string(ids[i]) + " outside embedding table of " +
                            std::to_string(table.rows()) + " rows");
    }
    std::memcpy(&out.data()[i * d], &table.matrix.data()[ids[i] * d], d * sizeof(double));
  }
  return out;
}

}  // namespace fisher_probe::models
