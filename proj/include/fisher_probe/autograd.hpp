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

// Minimal reverse-mode differentiation over dense tensors.
//
// A Graph is a static list of primitive nodes in topological order. It is
// evaluated against an input tensor and a ParamSet; both Graph and ParamSet
// are immutable during evaluation, so concurrent evaluation from several
// threads is safe.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fisher_probe/tensor.hpp"

namespace fisher_probe::autograd {

using NodeId = std::size_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

/// Floor applied to log-probabilities wherever a probability could be
/// divided by or its logarithm reported as a loss.
inline const double kLogProbFloor = std::log(1e-12);

enum class Op {
  kInput,
  kParam,
  kMatMul,
  kAdd,
  kTanh,
  kRelu,
  kConv1d,
  kMaxOverTime,
  kConcat,
  kDropout,
  kLogSoftmax,
};

const char* op_name(Op op);

struct Node {
  Op op;
  std::vector<NodeId> inputs;
  std::size_t param_index = 0;  // kParam only
  double rate = 0.0;            // kDropout only
};

struct NamedTensor {
  std::string name;
  Tensor value;

  bool operator==(const NamedTensor&) const = default;
};

/// Ordered collection of named parameter tensors.
class ParamSet {
 public:
  ParamSet() = default;
  explicit ParamSet(std::vector<NamedTensor> entries);

  std::size_t size() const { return entries_.size(); }
  const NamedTensor& operator[](std::size_t i) const { return entries_[i]; }
  NamedTensor& operator[](std::size_t i) { return entries_[i]; }
  const Tensor& value(std::size_t i) const { return entries_[i].value; }
  Tensor& value(std::size_t i) { return entries_[i].value; }

  std::size_t add(std::string name, Tensor value);
  std::size_t index_of(const std::string& name) const;

  /// Total number of scalar parameters.
  std::size_t scalar_count() const;

  /// Same names and shapes, all zeros.
  ParamSet zeros_like() const;

  /// this += scale * other (shapes must agree).
  void axpy(double scale, const ParamSet& other);
  void scale(double factor);

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  bool operator==(const ParamSet&) const = default;

 private:
  std::vector<NamedTensor> entries_;
};

/// Static computation graph for a classifier with one log-probability
/// output of shape [C].
///
/// Builder methods append nodes and return their ids; they check only the
/// wiring. Shape consistency is checked at evaluation time because text
/// inputs have a variable leading extent.
class Graph {
 public:
  /// Declares the input. An extent of 0 accepts any positive length.
  NodeId input(Tensor::Shape shape);
  NodeId param(std::size_t index);
  /// [k]x[k,n] -> [n] or [m,k]x[k,n] -> [m,n].
  NodeId matmul(NodeId a, NodeId b);
  /// Elementwise sum; b may be a row vector broadcast over a's rows.
  NodeId add(NodeId a, NodeId b);
  NodeId tanh(NodeId x);
  NodeId relu(NodeId x);
  /// Valid 1-d convolution over time: x [n,d], w [width,d,F], optional
  /// bias [F] -> [n-width+1, F].
  NodeId conv1d(NodeId x, NodeId w, NodeId bias = kNoNode);
  /// [T,F] -> [F], maximum over the time axis.
  NodeId max_over_time(NodeId x);
  /// Concatenation of rank-1 nodes.
  NodeId concat(std::vector<NodeId> parts);
  /// Inverted dropout; identity unless evaluated in training mode.
  NodeId dropout(NodeId x, double rate);
  NodeId log_softmax(NodeId x);

  void set_output(NodeId id);

  const std::vector<Node>& nodes() const { return nodes_; }
  NodeId output() const { return output_; }
  NodeId input_node() const { return input_; }
  const Tensor::Shape& input_shape() const { return input_shape_; }

  /// Throws ShapeError unless `shape` is admissible for this graph's input.
  void check_input_shape(const Tensor::Shape& shape) const;

 private:
  NodeId append(Node node);
  void check_ids(const std::vector<NodeId>& ids) const;

  std::vector<Node> nodes_;
  Tensor::Shape input_shape_;
  NodeId input_ = kNoNode;
  NodeId output_ = kNoNode;
};

struct EvalOptions {
  bool training = false;
  std::uint64_t dropout_key = 0;
};

/// Forward values of every node, plus what backpropagation needs.
struct Trace {
  std::vector<Tensor> values;
  std::vector<std::vector<std::size_t>> argmax;  // kMaxOverTime
  std::vector<std::vector<double>> dropout;      // kDropout scale per element

  const Tensor& output(const Graph& graph) const { return values[graph.output()]; }
};

Trace evaluate(const Graph& graph, const Tensor& input, const ParamSet& params,
               const EvalOptions& options = {});

/// Reverse pass from `output_seed` (the adjoint of the output node).
/// Either sink may be null. Parameter gradients are accumulated into
/// `param_grads`, which must be shaped like `params`.
void backpropagate(const Graph& graph, const Trace& trace, const ParamSet& params,
                   const Tensor& output_seed, Tensor* input_grad, ParamSet* param_grads);

/// Log-probability vector of length C.
Tensor forward(const Graph& graph, const Tensor& input, const ParamSet& params);

/// d log p(y = output_index | x) / dx, shaped like `input`.
Tensor grad_input(const Graph& graph, const Tensor& input, const ParamSet& params,
                  std::size_t output_index);

/// All C rows of the log-probability Jacobian from one forward pass.
struct InputJacobian {
  Tensor log_probs;
  std::vector<Tensor> rows;
};
InputJacobian input_jacobian(const Graph& graph, const Tensor& input, const ParamSet& params);

/// -log p[label], with log p floored at kLogProbFloor.
double cross_entropy(const Tensor& log_probs, std::size_t label);

struct LossGradient {
  double loss = 0.0;  // mean floored cross-entropy
  ParamSet grads;
};

/// Per-example evaluation options for a batch; empty means inference mode.
struct BatchOptions {
  bool training = false;
  std::uint64_t dropout_key = 0;  // example i uses key(dropout_key, i)
};

/// Gradient of mean cross-entropy over a batch w.r.t. every parameter.
///
/// Per-example gradients are computed in parallel and reduced in example
/// order, so the result is bit-identical to grad_params_serial.
LossGradient grad_params(const Graph& graph, std::span<const Tensor> batch,
                         std::span<const std::size_t> labels, const ParamSet& params,
                         const BatchOptions& options = {});

/// Single-threaded reference for grad_params.
LossGradient grad_params_serial(const Graph& graph, std::span<const Tensor> batch,
                                std::span<const std::size_t> labels, const ParamSet& params,
                                const BatchOptions& options = {});

}  // namespace fisher_probe::autograd
