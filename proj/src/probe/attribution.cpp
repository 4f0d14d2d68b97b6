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

#include <cmath>
#include <exception>

#include <omp.h>

#include "fisher_probe/autograd.hpp"
#include "fisher_probe/error.hpp"
#include "fisher_probe/parallel.hpp"
#include "fisher_probe/probe.hpp"

namespace fisher_probe::probe {

namespace {

void check_path(const Tensor& x, const Tensor& baseline, std::size_t steps) {
  if (steps < 2) throw InvalidArgument("integrated gradients needs at least 2 steps");
  if (x.shape() != baseline.shape()) {
    throw ShapeError("baseline shape " + shape_string(baseline.shape()) + " does not match input " +
                     shape_string(x.shape()));
  }
}

Tensor path_point(const Tensor& x, const Tensor& baseline, std::size_t k, std::size_t steps) {
  if (k == 0) return baseline;
  if (k == steps) return x;
  const double alpha = static_cast<double>(k) / static_cast<double>(steps);
  Tensor p = baseline;
  for (std::size_t i = 0; i < p.size(); ++i) p[i] += alpha * (x[i] - baseline[i]);
  return p;
}

double trapezoid_weight(std::size_t k, std::size_t steps) {
  const double w = 1.0 / static_cast<double>(steps);
  return k == 0 || k == steps ? 0.5 * w : w;
}

AttributionResult finish(const Tensor& x, const Tensor& baseline, std::vector<double>&& integrated, double f_x,
                         double f_base, std::size_t steps) {
  AttributionResult r;
  r.steps = steps;
  r.attributions = Tensor(x.shape(), std::move(integrated));
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    r.attributions[i] *= x[i] - baseline[i];
    total += r.attributions[i];
  }
  r.output_delta = f_x - f_base;
  r.completeness_residual = std::abs(total - r.output_delta);
  return r;
}

}  // namespace

AttributionResult integrate_path_serial(const ScalarField& field, const Tensor& x, const Tensor& baseline,
                                        std::size_t steps) {
  check_path(x, baseline, steps);
  std::vector<double> acc(x.size(), 0.0);
  double f_x = 0.0;
  double f_base = 0.0;
  for (std::size_t k = 0; k <= steps; ++k) {
    Tensor grad;
    const double f = field(path_point(x, baseline, k, steps), grad);
    if (k == 0) f_base = f;
    if (k == steps) f_x = f;
    const double w = trapezoid_weight(k, steps);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * grad[i];
  }
  return finish(x, baseline, std::move(acc), f_x, f_base, steps);
}

AttributionResult integrate_path(const ScalarField& field, const Tensor& x, const Tensor& baseline,
                                 std::size_t steps) {
  check_path(x, baseline, steps);
  std::vector<Tensor> grads(steps + 1);
  std::vector<double> values(steps + 1, 0.0);
  std::vector<std::exception_ptr> errors(steps + 1);
  const int threads = parallel::thread_limit();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::size_t k = 0; k <= steps; ++k) {
    try {
      values[k] = field(path_point(x, baseline, k, steps), grads[k]);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  std::vector<double> acc(x.size(), 0.0);
  for (std::size_t k = 0; k <= steps; ++k) {
    if (errors[k]) std::rethrow_exception(errors[k]);
    const double w = trapezoid_weight(k, steps);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * grads[k][i];
  }
  return finish(x, baseline, std::move(acc), values[steps], values[0], steps);
}

ScalarField log_prob_field(const models::Model& model, std::size_t target) {
  if (target >= model.num_classes()) {
    throw InvalidArgument("target class " + std::to_string(target) + " out of range for " +
                          std::to_string(model.num_classes()) + " classes");
  }
  return [&model, target](const Tensor& x, Tensor& grad) {
    const autograd::Trace trace = autograd::evaluate(model.graph, x, model.params);
    const Tensor& logp = trace.output(model.graph);
    Tensor seed(logp.shape());
    seed[target] = 1.0;
    autograd::backpropagate(model.graph, trace, model.params, seed, &grad, nullptr);
    return logp[target];
  };
}

AttributionResult integrated_gradients(const datakit::Classifier& classifier, const datakit::Example& example,
                                       std::size_t target, std::size_t steps, Baseline baseline) {
  const datakit::EncodedInput enc = classifier.encode(example);
  Tensor base(enc.x.shape());
  if (baseline == Baseline::kPad && classifier.embeddings && !example.is_point()) {
    std::vector<std::size_t> pads(enc.x.dim(0), classifier.embeddings->pad_row);
    base = models::embed(pads, *classifier.embeddings);
  }
  AttributionResult r = integrate_path(log_prob_field(classifier.model, target), enc.x, base, steps);
  r.target_class = target;
  if (enc.x.rank() == 1) {
    r.token_scores = r.attributions.values();
  } else {
    const std::size_t d = enc.x.dim(1);
    r.token_scores.assign(enc.n_tokens, 0.0);
    for (std::size_t t = 0; t < enc.n_tokens; ++t) {
      for (std::size_t j = 0; j < d; ++j) r.token_scores[t] += r.attributions.at(t, j);
    }
  }
  return r;
}

}  // namespace fisher_probe::probe
