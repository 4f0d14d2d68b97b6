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
#include <exception>

#include <omp.h>

#include "fisher_probe/autograd.hpp"
#include "fisher_probe/error.hpp"
#include "fisher_probe/parallel.hpp"
#include "fisher_probe/rng.hpp"

namespace fisher_probe::autograd {

namespace {

void check_batch(std::span<const Tensor> batch, std::span<const std::size_t> labels) {
  if (batch.empty()) throw InvalidArgument("batch must not be empty");
  if (batch.size() != labels.size()) throw InvalidArgument("batch and label counts differ");
}

EvalOptions example_options(const BatchOptions& options, std::size_t index) {
  EvalOptions eval;
  eval.training = options.training;
  eval.dropout_key = rng::key(options.dropout_key, index);
  return eval;
}

// Loss and parameter gradient of one example, scaled by 1/batch_size.
double example_gradient(const Graph& graph, const Tensor& x, std::size_t label, const ParamSet& params,
                        const EvalOptions& eval, double weight, ParamSet& sink) {
  const Trace trace = evaluate(graph, x, params, eval);
  const Tensor& logp = trace.output(graph);
  const double loss = cross_entropy(logp, label);
  // Gradient of -log p[label] without the floor, so that strongly
  // misclassified examples still contribute.
  Tensor seed(logp.shape());
  seed[label] = -weight;
  backpropagate(graph, trace, params, seed, nullptr, &sink);
  return loss;
}

}  // namespace

Tensor forward(const Graph& graph, const Tensor& input, const ParamSet& params) {
  Trace trace = evaluate(graph, input, params);
  return std::move(trace.values[graph.output()]);
}

Tensor grad_input(const Graph& graph, const Tensor& input, const ParamSet& params, std::size_t output_index) {
  const Trace trace = evaluate(graph, input, params);
  const Tensor& logp = trace.output(graph);
  if (output_index >= logp.size()) {
    throw InvalidArgument("class index " + std::to_string(output_index) + " out of range for " +
                          std::to_string(logp.size()) + " classes");
  }
  Tensor seed(logp.shape());
  seed[output_index] = 1.0;
  Tensor grad;
  backpropagate(graph, trace, params, seed, &grad, nullptr);
  return grad;
}

InputJacobian input_jacobian(const Graph& graph, const Tensor& input, const ParamSet& params) {
  const Trace trace = evaluate(graph, input, params);
  InputJacobian out;
  out.log_probs = trace.output(graph);
  out.rows.reserve(out.log_probs.size());
  for (std::size_t c = 0; c < out.log_probs.size(); ++c) {
    Tensor seed(out.log_probs.shape());
    seed[c] = 1.0;
    Tensor grad;
    backpropagate(graph, trace, params, seed, &grad, nullptr);
    out.rows.push_back(std::move(grad));
  }
  return out;
}

double cross_entropy(const Tensor& log_probs, std::size_t label) {
  if (label >= log_probs.size()) {
    throw InvalidArgument("label " + std::to_string(label) + " out of range for " +
                          std::to_string(log_probs.size()) + " classes");
  }
  return -std::max(log_probs[label], kLogProbFloor);
}

LossGradient grad_params_serial(const Graph& graph, std::span<const Tensor> batch,
                                std::span<const std::size_t> labels, const ParamSet& params,
                                const BatchOptions& options) {
  check_batch(batch, labels);
  const double weight = 1.0 / static_cast<double>(batch.size());
  LossGradient out{0.0, params.zeros_like()};
  ParamSet scratch = params.zeros_like();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    scratch.scale(0.0);
    out.loss += example_gradient(graph, batch[i], labels[i], params, example_options(options, i), weight, scratch);
    out.grads.axpy(1.0, scratch);
  }
  out.loss *= weight;
  return out;
}

LossGradient grad_params(const Graph& graph, std::span<const Tensor> batch, std::span<const std::size_t> labels,
                         const ParamSet& params, const BatchOptions& options) {
  check_batch(batch, labels);
  const double weight = 1.0 / static_cast<double>(batch.size());
  const std::size_t n = batch.size();
  // Chunking bounds the number of per-example gradient buffers alive at once.
  constexpr std::size_t kChunk = 64;
  const std::size_t chunk = std::min(n, kChunk);
  std::vector<ParamSet> partial(chunk, params.zeros_like());
  std::vector<double> losses(chunk, 0.0);
  std::vector<std::exception_ptr> errors(chunk);

  LossGradient out{0.0, params.zeros_like()};
  const int threads = parallel::thread_limit();
  for (std::size_t begin = 0; begin < n; begin += chunk) {
    const std::size_t count = std::min(chunk, n - begin);
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (std::size_t j = 0; j < count; ++j) {
      try {
        partial[j].scale(0.0);
        const std::size_t i = begin + j;
        losses[j] = example_gradient(graph, batch[i], labels[i], params, example_options(options, i), weight,
                                     partial[j]);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
    for (std::size_t j = 0; j < count; ++j) {
      if (errors[j]) std::rethrow_exception(errors[j]);
      out.loss += losses[j];
      out.grads.axpy(1.0, partial[j]);
    }
  }
  out.loss *= weight;
  return out;
}

}  // namespace fisher_probe::autograd
