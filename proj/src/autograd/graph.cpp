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

#include <sstream>

#include "fisher_probe/autograd.hpp"
#include "fisher_probe/error.hpp"

namespace fisher_probe::autograd {

const char* op_name(Op op) {
  switch (op) {
    case Op::kInput: return "input";
    case Op::kParam: return "param";
    case Op::kMatMul: return "matmul";
    case Op::kAdd: return "add";
    case Op::kTanh: return "tanh";
    case Op::kRelu: return "relu";
    case Op::kConv1d: return "conv1d";
    case Op::kMaxOverTime: return "max_over_time";
    case Op::kConcat: return "concat";
    case Op::kDropout: return "dropout";
    case Op::kLogSoftmax: return "log_softmax";
  }
  return "unknown";
}

ParamSet::ParamSet(std::vector<NamedTensor> entries) : entries_(std::move(entries)) {}

std::size_t ParamSet::add(std::string name, Tensor value) {
  entries_.push_back({std::move(name), std::move(value)});
  return entries_.size() - 1;
}

std::size_t ParamSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return i;
  }
  throw InvalidArgument("no parameter named '" + name + "'");
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (const auto& e : entries_) out.add(e.name, Tensor(e.value.shape()));
  return out;
}

void ParamSet::axpy(double scale, const ParamSet& other) {
  if (other.size() != size()) throw ShapeError("parameter sets differ in length");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto dst = entries_[i].value.data();
    auto src = other.value(i).data();
    if (dst.size() != src.size()) throw ShapeError("parameter '" + entries_[i].name + "' shape mismatch");
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += scale * src[j];
  }
}

void ParamSet::scale(double factor) {
  for (auto& e : entries_) {
    for (double& v : e.value.data()) v *= factor;
  }
}

NodeId Graph::append(Node node) {
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

void Graph::check_ids(const std::vector<NodeId>& ids) const {
  for (NodeId id : ids) {
    if (id >= nodes_.size()) throw InvalidArgument("graph node id " + std::to_string(id) + " does not exist");
  }
}

NodeId Graph::input(Tensor::Shape shape) {
  if (input_ != kNoNode) throw InvalidArgument("graph already has an input node");
  if (shape.empty()) throw ShapeError("input shape must have at least one axis");
  input_shape_ = std::move(shape);
  input_ = append({Op::kInput, {}});
  return input_;
}

NodeId Graph::param(std::size_t index) {
  Node n{Op::kParam, {}};
  n.param_index = index;
  return append(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  check_ids({a, b});
  return append({Op::kMatMul, {a, b}});
}

NodeId Graph::add(NodeId a, NodeId b) {
  check_ids({a, b});
  return append({Op::kAdd, {a, b}});
}

NodeId Graph::tanh(NodeId x) {
  check_ids({x});
  return append({Op::kTanh, {x}});
}

NodeId Graph::relu(NodeId x) {
  check_ids({x});
  return append({Op::kRelu, {x}});
}

NodeId Graph::conv1d(NodeId x, NodeId w, NodeId bias) {
  std::vector<NodeId> inputs{x, w};
  if (bias != kNoNode) inputs.push_back(bias);
  check_ids(inputs);
  return append({Op::kConv1d, std::move(inputs)});
}

NodeId Graph::max_over_time(NodeId x) {
  check_ids({x});
  return append({Op::kMaxOverTime, {x}});
}

NodeId Graph::concat(std::vector<NodeId> parts) {
  if (parts.empty()) throw InvalidArgument("concat needs at least one part");
  check_ids(parts);
  return append({Op::kConcat, std::move(parts)});
}

NodeId Graph::dropout(NodeId x, double rate) {
  check_ids({x});
  if (!(rate >= 0.0 && rate < 1.0)) throw InvalidArgument("dropout rate must lie in [0, 1)");
  Node n{Op::kDropout, {x}};
  n.rate = rate;
  return append(std::move(n));
}

NodeId Graph::log_softmax(NodeId x) {
  check_ids({x});
  return append({Op::kLogSoftmax, {x}});
}

void Graph::set_output(NodeId id) {
  check_ids({id});
  output_ = id;
}

void Graph::check_input_shape(const Tensor::Shape& shape) const {
  bool ok = shape.size() == input_shape_.size();
  for (std::size_t i = 0; ok && i < shape.size(); ++i) {
    ok = shape[i] > 0 && (input_shape_[i] == 0 || input_shape_[i] == shape[i]);
  }
  if (!ok) {
    throw ShapeError("input shape " + shape_string(shape) + " does not match declared shape " +
                     shape_string(input_shape_) + " (0 = any extent)");
  }
}

}  // namespace fisher_probe::autograd
