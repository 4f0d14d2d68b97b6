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

#include "fisher_probe/autograd.hpp"
#include "fisher_probe/error.hpp"
#include "fisher_probe/rng.hpp"

namespace fisher_probe::autograd {

namespace {

std::string node_label(const Graph& graph, NodeId id) {
  return std::string(op_name(graph.nodes()[id].op)) + " node " + std::to_string(id);
}

[[noreturn]] void shape_fail(const Graph& graph, NodeId id, const std::string& what) {
  throw ShapeError(node_label(graph, id) + ": " + what);
}

Tensor eval_matmul(const Graph& g, NodeId id, const Tensor& a, const Tensor& b) {
  if (b.rank() != 2) shape_fail(g, id, "right operand must be rank 2, got " + shape_string(b.shape()));
  const std::size_t k = b.dim(0);
  const std::size_t n = b.dim(1);
  if (a.rank() == 1) {
    if (a.dim(0) != k) shape_fail(g, id, shape_string(a.shape()) + " x " + shape_string(b.shape()));
    Tensor out({n});
    for (std::size_t i = 0; i < k; ++i) {
      const double ai = a[i];
      const double* brow = &b.data()[i * n];
      for (std::size_t j = 0; j < n; ++j) out[j] += ai * brow[j];
    }
    return out;
  }
  if (a.rank() != 2 || a.dim(1) != k) {
    shape_fail(g, id, shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0);
  Tensor out({m, n});
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t i = 0; i < k; ++i) {
      const double ari = a.at(r, i);
      const double* brow = &b.data()[i * n];
      double* orow = &out.data()[r * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += ari * brow[j];
    }
  }
  return out;
}

bool is_row_broadcast(const Tensor& a, const Tensor& b) {
  return a.rank() == 2 && b.rank() == 1 && a.dim(1) == b.dim(0);
}

Tensor eval_add(const Graph& g, NodeId id, const Tensor& a, const Tensor& b) {
  Tensor out = a;
  if (a.shape() == b.shape()) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
  }
  if (!is_row_broadcast(a, b)) shape_fail(g, id, shape_string(a.shape()) + " + " + shape_string(b.shape()));
  const std::size_t cols = b.size();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i % cols];
  return out;
}

Tensor eval_conv1d(const Graph& g, NodeId id, const Tensor& x, const Tensor& w, const Tensor* bias) {
  if (x.rank() != 2) shape_fail(g, id, "input must be [n, d], got " + shape_string(x.shape()));
  if (w.rank() != 3 || w.dim(1) != x.dim(1)) {
    shape_fail(g, id, "filter " + shape_string(w.shape()) + " incompatible with input " + shape_string(x.shape()));
  }
  const std::size_t n = x.dim(0);
  const std::size_t d = x.dim(1);
  const std::size_t width = w.dim(0);
  const std::size_t filters = w.dim(2);
  if (bias != nullptr && (bias->rank() != 1 || bias->dim(0) != filters)) {
    shape_fail(g, id, "bias " + shape_string(bias->shape()) + " does not match " + std::to_string(filters) + " filters");
  }
  if (n < width) {
    shape_fail(g, id, "input length " + std::to_string(n) + " is shorter than filter width " + std::to_string(width));
  }
  const std::size_t steps = n - width + 1;
  const std::size_t window = width * d;
  Tensor out({steps, filters});
  const double* xd = x.data().data();
  const double* wd = w.data().data();
  for (std::size_t t = 0; t < steps; ++t) {
    double* orow = &out.data()[t * filters];
    if (bias != nullptr) std::copy(bias->data().begin(), bias->data().end(), orow);
    const double* xw = xd + t * d;
    for (std::size_t j = 0; j < window; ++j) {
      const double xv = xw[j];
      if (xv == 0.0) continue;
      const double* wrow = wd + j * filters;
      for (std::size_t f = 0; f < filters; ++f) orow[f] += xv * wrow[f];
    }
  }
  return out;
}

Tensor eval_log_softmax(const Graph& g, NodeId id, const Tensor& z) {
  if (z.rank() != 1 || z.size() < 2) shape_fail(g, id, "expects a vector of at least 2 logits, got " + shape_string(z.shape()));
  const double m = *std::max_element(z.data().begin(), z.data().end());
  double sum = 0.0;
  for (double v : z.data()) sum += std::exp(v - m);
  const double lse = m + std::log(sum);
  Tensor out = z;
  for (double& v : out.data()) v -= lse;
  return out;
}

Tensor& ensure(std::vector<Tensor>& adj, NodeId id, const Tensor::Shape& shape) {
  if (adj[id].empty()) adj[id] = Tensor(shape);
  return adj[id];
}

}  // namespace

Trace evaluate(const Graph& graph, const Tensor& input, const ParamSet& params, const EvalOptions& options) {
  if (graph.input_node() == kNoNode) throw InvalidArgument("graph has no input node");
  if (graph.output() == kNoNode) throw InvalidArgument("graph has no output node");
  graph.check_input_shape(input.shape());

  const auto& nodes = graph.nodes();
  Trace trace;
  trace.values.resize(nodes.size());
  trace.argmax.resize(nodes.size());
  trace.dropout.resize(nodes.size());

  auto value = [&](NodeId id) -> const Tensor& {
    const Node& n = nodes[id];
    return n.op == Op::kParam ? params.value(n.param_index) : trace.values[id];
  };

  for (NodeId id = 0; id < nodes.size(); ++id) {
    const Node& node = nodes[id];
    Tensor out;
    switch (node.op) {
      case Op::kInput:
        out = input;
        break;
      case Op::kParam:
        if (node.param_index >= params.size()) {
          throw InvalidArgument(node_label(graph, id) + " refers to missing parameter " +
                                std::to_string(node.param_index));
        }
        continue;  // read in place from params
      case Op::kMatMul:
        out = eval_matmul(graph, id, value(node.inputs[0]), value(node.inputs[1]));
        break;
      case Op::kAdd:
        out = eval_add(graph, id, value(node.inputs[0]), value(node.inputs[1]));
        break;
      case Op::kTanh:
        out = value(node.inputs[0]);
        for (double& v : out.data()) v = std::tanh(v);
        break;
      case Op::kRelu:
        out = value(node.inputs[0]);
        for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
        break;
      case Op::kConv1d:
        out = eval_conv1d(graph, id, value(node.inputs[0]), value(node.inputs[1]),
                          node.inputs.size() > 2 ? &value(node.inputs[2]) : nullptr);
        break;
      case Op::kMaxOverTime: {
        const Tensor& x = value(node.inputs[0]);
        if (x.rank() != 2) shape_fail(graph, id, "expects [T, F], got " + shape_string(x.shape()));
        const std::size_t steps = x.dim(0);
        const std::size_t f = x.dim(1);
        out = Tensor({f});
        auto& arg = trace.argmax[id];
        arg.assign(f, 0);
        for (std::size_t j = 0; j < f; ++j) {
          double best = x.at(0, j);
          for (std::size_t t = 1; t < steps; ++t) {
            if (x.at(t, j) > best) {
              best = x.at(t, j);
              arg[j] = t;
            }
          }
          out[j] = best;
        }
        break;
      }
      case Op::kConcat: {
        std::vector<double> joined;
        for (NodeId part : node.inputs) {
          const Tensor& p = value(part);
          if (p.rank() != 1) shape_fail(graph, id, "parts must be vectors, got " + shape_string(p.shape()));
          joined.insert(joined.end(), p.data().begin(), p.data().end());
        }
        out = Tensor::vector(std::move(joined));
        break;
      }
      case Op::kDropout:
        out = value(node.inputs[0]);
        if (options.training && node.rate > 0.0) {
          const std::uint64_t stream = rng::key(options.dropout_key, id);
          const double keep_scale = 1.0 / (1.0 - node.rate);
          auto& scale = trace.dropout[id];
          scale.resize(out.size());
          for (std::size_t i = 0; i < out.size(); ++i) {
            scale[i] = rng::counter_uniform(stream, i) >= node.rate ? keep_scale : 0.0;
            out[i] *= scale[i];
          }
        }
        break;
      case Op::kLogSoftmax:
        out = eval_log_softmax(graph, id, value(node.inputs[0]));
        break;
    }
    if (!out.all_finite()) throw NumericError("non-finite value produced by " + node_label(graph, id));
    trace.values[id] = std::move(out);
  }
  return trace;
}

void backpropagate(const Graph& graph, const Trace& trace, const ParamSet& params, const Tensor& output_seed,
                   Tensor* input_grad, ParamSet* param_grads) {
  const auto& nodes = graph.nodes();
  const NodeId out_id = graph.output();
  if (output_seed.shape() != trace.values[out_id].shape()) {
    throw ShapeError("output seed " + shape_string(output_seed.shape()) + " does not match output " +
                     shape_string(trace.values[out_id].shape()));
  }
  if (param_grads != nullptr && param_grads->size() != params.size()) {
    throw ShapeError("gradient sink does not match parameter set");
  }

  // Only walk nodes that lead back to a requested sink.
  std::vector<char> wanted(nodes.size(), 0);
  for (NodeId id = 0; id < nodes.size(); ++id) {
    const Node& n = nodes[id];
    if (n.op == Op::kInput) wanted[id] = input_grad != nullptr;
    else if (n.op == Op::kParam) wanted[id] = param_grads != nullptr;
    else {
      for (NodeId in : n.inputs) wanted[id] = wanted[id] || wanted[in];
    }
  }

  auto value = [&](NodeId id) -> const Tensor& {
    const Node& n = nodes[id];
    return n.op == Op::kParam ? params.value(n.param_index) : trace.values[id];
  };

  std::vector<Tensor> adj(nodes.size());
  adj[out_id] = output_seed;

  for (NodeId id = out_id + 1; id-- > 0;) {
    if (adj[id].empty() || !wanted[id]) continue;
    const Node& node = nodes[id];
    const Tensor& g = adj[id];
    switch (node.op) {
      case Op::kInput:
      case Op::kParam:
        break;
      case Op::kMatMul: {
        const NodeId ia = node.inputs[0];
        const NodeId ib = node.inputs[1];
        const Tensor& a = value(ia);
        const Tensor& b = value(ib);
        const std::size_t k = b.dim(0);
        const std::size_t n = b.dim(1);
        const std::size_t m = a.rank() == 1 ? 1 : a.dim(0);
        if (wanted[ia]) {
          Tensor& da = ensure(adj, ia, a.shape());
          for (std::size_t r = 0; r < m; ++r) {
            const double* grow = &g.data()[r * n];
            for (std::size_t i = 0; i < k; ++i) {
              const double* brow = &b.data()[i * n];
              double acc = 0.0;
              for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
              da[r * k + i] += acc;
            }
          }
        }
        if (wanted[ib]) {
          Tensor& db = ensure(adj, ib, b.shape());
          for (std::size_t r = 0; r < m; ++r) {
            const double* grow = &g.data()[r * n];
            for (std::size_t i = 0; i < k; ++i) {
              const double ari = a[r * k + i];
              double* dbrow = &db.data()[i * n];
              for (std::size_t j = 0; j < n; ++j) dbrow[j] += ari * grow[j];
            }
          }
        }
        break;
      }
      case Op::kAdd: {
        const NodeId ia = node.inputs[0];
        const NodeId ib = node.inputs[1];
        if (wanted[ia]) {
          Tensor& da = ensure(adj, ia, value(ia).shape());
          for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
        }
        if (wanted[ib]) {
          const Tensor& b = value(ib);
          Tensor& db = ensure(adj, ib, b.shape());
          const std::size_t cols = b.size();
          for (std::size_t i = 0; i < g.size(); ++i) db[i % cols] += g[i];
        }
        break;
      }
      case Op::kTanh: {
        const NodeId ix = node.inputs[0];
        if (!wanted[ix]) break;
        const Tensor& y = trace.values[id];
        Tensor& dx = ensure(adj, ix, y.shape());
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * (1.0 - y[i] * y[i]);
        break;
      }
      case Op::kRelu: {
        const NodeId ix = node.inputs[0];
        if (!wanted[ix]) break;
        const Tensor& y = trace.values[id];
        Tensor& dx = ensure(adj, ix, y.shape());
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (y[i] > 0.0) dx[i] += g[i];
        }
        break;
      }
      case Op::kConv1d: {
        const NodeId ix = node.inputs[0];
        const NodeId iw = node.inputs[1];
        const Tensor& x = value(ix);
        const Tensor& w = value(iw);
        const std::size_t d = x.dim(1);
        const std::size_t filters = w.dim(2);
        const std::size_t window = w.dim(0) * d;
        const std::size_t steps = g.dim(0);
        if (wanted[ix]) {
          Tensor& dx = ensure(adj, ix, x.shape());
          for (std::size_t t = 0; t < steps; ++t) {
            const double* grow = &g.data()[t * filters];
            double* dxw = &dx.data()[t * d];
            for (std::size_t j = 0; j < window; ++j) {
              const double* wrow = &w.data()[j * filters];
              double acc = 0.0;
              for (std::size_t f = 0; f < filters; ++f) acc += wrow[f] * grow[f];
              dxw[j] += acc;
            }
          }
        }
        if (wanted[iw]) {
          Tensor& dw = ensure(adj, iw, w.shape());
          for (std::size_t t = 0; t < steps; ++t) {
            const double* grow = &g.data()[t * filters];
            const double* xw = &x.data()[t * d];
            for (std::size_t j = 0; j < window; ++j) {
              const double xv = xw[j];
              if (xv == 0.0) continue;
              double* dwrow = &dw.data()[j * filters];
              for (std::size_t f = 0; f < filters; ++f) dwrow[f] += xv * grow[f];
            }
          }
        }
        if (node.inputs.size() > 2 && wanted[node.inputs[2]]) {
          const NodeId ibias = node.inputs[2];
          Tensor& db = ensure(adj, ibias, value(ibias).shape());
          for (std::size_t t = 0; t < steps; ++t) {
            for (std::size_t f = 0; f < filters; ++f) db[f] += g.at(t, f);
          }
        }
        break;
      }
      case Op::kMaxOverTime: {
        const NodeId ix = node.inputs[0];
        if (!wanted[ix]) break;
        const Tensor& x = value(ix);
        Tensor& dx = ensure(adj, ix, x.shape());
        const auto& arg = trace.argmax[id];
        for (std::size_t f = 0; f < g.size(); ++f) dx.at(arg[f], f) += g[f];
        break;
      }
      case Op::kConcat: {
        std::size_t offset = 0;
        for (NodeId part : node.inputs) {
          const std::size_t len = value(part).size();
          if (wanted[part]) {
            Tensor& dp = ensure(adj, part, value(part).shape());
            for (std::size_t i = 0; i < len; ++i) dp[i] += g[offset + i];
          }
          offset += len;
        }
        break;
      }
      case Op::kDropout: {
        const NodeId ix = node.inputs[0];
        if (!wanted[ix]) break;
        Tensor& dx = ensure(adj, ix, g.shape());
        const auto& scale = trace.dropout[id];
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += scale.empty() ? g[i] : g[i] * scale[i];
        break;
      }
      case Op::kLogSoftmax: {
        const NodeId ix = node.inputs[0];
        if (!wanted[ix]) break;
        const Tensor& y = trace.values[id];
        double gsum = 0.0;
        for (double v : g.data()) gsum += v;
        Tensor& dx = ensure(adj, ix, y.shape());
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] - std::exp(y[i]) * gsum;
        break;
      }
    }
  }

  if (input_grad != nullptr) {
    const NodeId in = graph.input_node();
    *input_grad = adj[in].empty() ? Tensor(trace.values[in].shape()) : std::move(adj[in]);
  }
  if (param_grads != nullptr) {
    for (NodeId id = 0; id < nodes.size(); ++id) {
      if (nodes[id].op != Op::kParam || adj[id].empty()) continue;
      Tensor& sink = param_grads->value(nodes[id].param_index);
      if (sink.shape() != adj[id].shape()) throw ShapeError("gradient sink shape mismatch for parameter");
      for (std::size_t i = 0; i < sink.size(); ++i) sink[i] += adj[id][i];
    }
  }
}

}  // namespace fisher_probe::autograd
