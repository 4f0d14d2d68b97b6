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

#include <algorithm>

#include "fisher_probe/datakit.hpp"
#include "fisher_probe/error.hpp"

namespace fisher_probe::datakit {

EncodedInput Classifier::encode(const Example& example) const {
  if (model.spec.kind == models::ModelKind::kMlp) {
    if (!example.point) throw InvalidArgument("example '" + example.id + "' has no point for an mlp model");
    if (model.spec.layer_widths.front() != 2) throw InvalidArgument("mlp input width is not 2");
    EncodedInput out;
    out.x = Tensor::vector({(*example.point)[0], (*example.point)[1]});
    out.mask.assign(2, 1);
    out.n_tokens = 2;
    return out;
  }
  if (example.point) throw InvalidArgument("example '" + example.id + "' is a point but the model reads text");
  const auto tokens = tokenize(example.text);
  return encode_tokens(tokens);
}

EncodedInput Classifier::encode_tokens(std::span<const std::string> tokens) const {
  if (model.spec.kind != models::ModelKind::kTextCnn) throw InvalidArgument("token input needs a text model");
  if (!embeddings) throw InvalidArgument("text model has no embedding table");
  if (embeddings->dim != model.spec.embedding_dim) {
    throw ShapeError("embedding dim " + std::to_string(embeddings->dim) + " does not match model dim " +
                     std::to_string(model.spec.embedding_dim));
  }
  if (tokens.empty()) throw EmptyInputError("text is empty after tokenization");

  EncodedInput out;
  const std::size_t kept = std::min(tokens.size(), model.spec.max_tokens);
  out.tokens.assign(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(kept));
  out.n_tokens = kept;
  const std::size_t rows = std::max(kept, model.min_input_rows());
  std::vector<std::size_t> ids(rows, embeddings->pad_row);
  for (std::size_t i = 0; i < kept; ++i) ids[i] = embeddings->lookup(out.tokens[i]);
  out.x = models::embed(ids, *embeddings);
  const std::size_t d = embeddings->dim;
  out.mask.assign(rows * d, 0);
  std::fill(out.mask.begin(), out.mask.begin() + static_cast<std::ptrdiff_t>(kept * d), 1);
  return out;
}

}  // namespace fisher_probe::datakit
