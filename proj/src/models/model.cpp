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
#include <cmath>

#include "fisher_probe/error.hpp"
#include "fisher_probe/models.hpp"
#include "fisher_probe/rng.hpp"

namespace fisher_probe::models {

namespace {

struct ParamLayout {
  std::string name;
  Tensor::Shape shape;
  std::size_t fan_in = 0;   // 0 marks a bias
  std::size_t fan_out = 0;
};

std::vector<ParamLayout> layout(const ModelSpec& spec) {
  std::vector<ParamLayout> out;
  if (spec.kind == ModelKind::kMlp) {
    for (std::size_t l = 0; l + 1 < spec.layer_widths.size(); ++l) {
      const std::size_t in = spec.layer_widths[l];
      const std::size_t o = spec.layer_widths[l + 1];
      out.push_back({"dense" + std::to_string(l) + ".weight", {in, o}, in, o});
      out.push_back({"dense" + std::to_string(l) + ".bias", {o}, 0, 0});
    }
    return out;
  }
  const std::size_t d = spec.embedding_dim;
  const std::size_t f = spec.filters_per_width;
  for (std::size_t w : spec.filter_widths) {
    out.push_back({"conv" + std::to_string(w) + ".weight", {w, d, f}, w * d, f});
    if (spec.conv_bias) out.push_back({"conv" + std::to_string(w) + ".bias", {f}, 0, 0});
  }
  const std::size_t features = f * spec.filter_widths.size();
  out.push_back({"output.weight", {features, spec.num_classes}, features, spec.num_classes});
  out.push_back({"output.bias", {spec.num_classes}, 0, 0});
  return out;
}

const char* kind_name(ModelKind kind) { return kind == ModelKind::kMlp ? "mlp" : "textcnn"; }
const char* activation_name(Activation a) { return a == Activation::kTanh ? "tanh" : "relu"; }

}  // namespace

ModelSpec default_mlp_spec() { return ModelSpec{}; }

ModelSpec default_textcnn_spec(std::size_t embedding_dim, std::size_t num_classes) {
  ModelSpec spec;
  spec.kind = ModelKind::kTextCnn;
  spec.num_classes = num_classes;
  spec.layer_widths.clear();
  spec.activation = Activation::kRelu;
  spec.embedding_dim = embedding_dim;
  return spec;
}

void validate(const ModelSpec& spec) {
  if (spec.num_classes < 2) throw InvalidArgument("a classifier needs at least 2 classes");
  if (spec.kind == ModelKind::kMlp) {
    const auto& w = spec.layer_widths;
    if (w.size() < 2) throw InvalidArgument("mlp needs at least input and output widths");
    if (std::any_of(w.begin(), w.end(), [](std::size_t v) { return v == 0; })) {
      throw InvalidArgument("mlp layer widths must be positive");
    }
    if (w.back() != spec.num_classes) throw InvalidArgument("mlp output width must equal num_classes");
    return;
  }
  if (spec.embedding_dim == 0) throw InvalidArgument("textcnn embedding_dim must be positive");
  if (spec.filter_widths.empty()) throw InvalidArgument("textcnn needs at least one filter width");
  if (spec.filters_per_width == 0) throw InvalidArgument("textcnn filters_per_width must be positive");
  if (spec.max_tokens == 0) throw InvalidArgument("textcnn max_tokens must be positive");
  for (std::size_t w : spec.filter_widths) {
    if (w == 0 || w > spec.max_tokens) {
      throw InvalidArgument("textcnn filter width " + std::to_string(w) + " must lie in [1, max_tokens]");
    }
  }
  if (!(spec.dropout >= 0.0 && spec.dropout < 1.0)) throw InvalidArgument("dropout must lie in [0, 1)");
}

nlohmann::json to_json(const ModelSpec& spec) {
  nlohmann::json j;
  j["kind"] = kind_name(spec.kind);
  j["num_classes"] = spec.num_classes;
  if (spec.kind == ModelKind::kMlp) {
    j["layer_widths"] = spec.layer_widths;
    j["activation"] = activation_name(spec.activation);
  } else {
    j["embedding_dim"] = spec.embedding_dim;
    j["filter_widths"] = spec.filter_widths;
    j["filters_per_width"] = spec.filters_per_width;
    j["dropout"] = spec.dropout;
    j["conv_bias"] = spec.conv_bias;
    j["max_tokens"] = spec.max_tokens;
  }
  return j;
}

ModelSpec spec_from_json(const nlohmann::json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    ModelSpec spec;
    if (kind == "mlp") {
      spec.kind = ModelKind::kMlp;
      spec.layer_widths = j.at("layer_widths").get<std::vector<std::size_t>>();
      const std::string act = j.value("activation", "tanh");
      if (act != "tanh" && act != "relu") throw ParseError("unknown activation '" + act + "'");
      spec.activation = act == "tanh" ? Activation::kTanh : Activation::kRelu;
    } else if (kind == "textcnn") {
      spec = default_textcnn_spec(j.at("embedding_dim").get<std::size_t>());
      spec.filter_widths = j.at("filter_widths").get<std::vector<std::size_t>>();
      spec.filters_per_width = j.at("filters_per_width").get<std::size_t>();
      spec.dropout = j.at("dropout").get<double>();
      spec.conv_bias = j.value("conv_bias", true);
      spec.max_tokens = j.value("max_tokens", std::size_t{400});
    } else {
      throw ParseError("unknown model kind '" + kind + "'");
    }
    spec.num_classes = j.at("num_classes").get<std::size_t>();
    validate(spec);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid model spec: ") + e.what());
  }
}

std::size_t Model::min_input_rows() const {
  if (spec.kind == ModelKind::kMlp) return 1;
  return *std::max_element(spec.filter_widths.begin(), spec.filter_widths.end());
}

autograd::Graph build_graph(const ModelSpec& spec) {
  validate(spec);
  autograd::Graph g;
  std::size_t next_param = 0;
  auto next = [&] { return g.param(next_param++); };

  if (spec.kind == ModelKind::kMlp) {
    autograd::NodeId h = g.input({spec.layer_widths.front()});
    const std::size_t layers = spec.layer_widths.size() - 1;
    for (std::size_t l = 0; l < layers; ++l) {
      const auto w = next();
      const auto b = next();
      h = g.add(g.matmul(h, w), b);
      if (l + 1 < layers) h = spec.activation == Activation::kTanh ? g.tanh(h) : g.relu(h);
    }
    g.set_output(g.log_softmax(h));
    return g;
  }

  const autograd::NodeId x = g.input({0, spec.embedding_dim});
  std::vector<autograd::NodeId> pooled;
  for (std::size_t i = 0; i < spec.filter_widths.size(); ++i) {
    const auto w = next();
    const auto b = spec.conv_bias ? next() : autograd::kNoNode;
    pooled.push_back(g.max_over_time(g.relu(g.conv1d(x, w, b))));
  }
  autograd::NodeId h = g.concat(std::move(pooled));
  h = g.dropout(h, spec.dropout);
  const auto w = next();
  const auto b = next();
  g.set_output(g.log_softmax(g.add(g.matmul(h, w), b)));
  return g;
}

Model build_model(const ModelSpec& spec, std::uint64_t seed) {
  validate(spec);
  rng::Stream stream(rng::key(seed, 0x6d6f64656cULL));
  autograd::ParamSet params;
  for (const auto& p : layout(spec)) {
    Tensor t(p.shape);
    if (p.fan_in > 0) {
      const double limit = std::sqrt(6.0 / static_cast<double>(p.fan_in + p.fan_out));
      for (double& v : t.data()) v = stream.uniform(-limit, limit);
    }
    params.add(p.name, std::move(t));
  }
  return assemble_model(spec, std::move(params));
}

Model assemble_model(const ModelSpec& spec, autograd::ParamSet params) {
  const auto expected = layout(spec);
  if (expected.size() != params.size()) {
    throw ShapeError("model expects " + std::to_string(expected.size()) + " parameter tensors, got " +
                     std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (params[i].name != expected[i].name || params[i].value.shape() != expected[i].shape) {
      throw ShapeError("parameter " + std::to_string(i) + " ('" + params[i].name + "' " +
                       shape_string(params[i].value.shape()) + ") does not match expected '" + expected[i].name +
                       "' " + shape_string(expected[i].shape));
    }
  }
  return Model{spec, build_graph(spec), std::move(params)};
}

}  // namespace fisher_probe::models
