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

#include "fisher_probe/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <exception>
#include <set>

#include <omp.h>

#include "fisher_probe/error.hpp"
#include "fisher_probe/parallel.hpp"
#include "fisher_probe/rng.hpp"

namespace fisher_probe::trainer {

namespace {

constexpr std::uint64_t kSplitStream = 0x73706c6974ULL;
constexpr std::uint64_t kShuffleStream = 0x73687566ULL;
constexpr std::uint64_t kDropoutStream = 0x64726f70ULL;

void shuffle(std::vector<std::size_t>& v, rng::Stream& stream) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = stream.below(i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace

TrainConfig default_mlp_config() {
  TrainConfig c;
  c.optimizer = OptimizerKind::kSgd;
  c.learning_rate = 0.1;
  c.batch_size = 0;
  c.epochs = 200;
  return c;
}

TrainConfig default_textcnn_config() { return TrainConfig{}; }

void validate(const TrainConfig& c) {
  if (!(c.valid_fraction > 0.0 && c.valid_fraction < 1.0)) throw InvalidArgument("valid_fraction must lie in (0, 1)");
  if (c.epochs == 0) throw InvalidArgument("epochs must be positive");
  if (!(c.learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (c.optimizer == OptimizerKind::kAdam &&
      !(c.beta1 >= 0.0 && c.beta1 < 1.0 && c.beta2 >= 0.0 && c.beta2 < 1.0 && c.epsilon > 0.0)) {
    throw InvalidArgument("adam betas must lie in [0, 1) and epsilon must be positive");
  }
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"optimizer", c.optimizer == OptimizerKind::kSgd ? "sgd" : "adam"},
          {"learning_rate", c.learning_rate},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"valid_fraction", c.valid_fraction},
          {"patience", c.patience}};
}

std::vector<LabeledInput> encode_all(const datakit::Classifier& classifier, std::span<const datakit::Example> data) {
  std::vector<LabeledInput> out;
  out.reserve(data.size());
  for (const auto& ex : data) out.push_back({classifier.encode(ex).x, ex.label});
  return out;
}

std::size_t predict(const Tensor& log_probs) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < log_probs.size(); ++c) {
    if (log_probs[c] > log_probs[best]) best = c;
  }
  return best;
}

EvalSummary evaluate_inputs(const models::Model& model, std::span<const LabeledInput> data) {
  if (data.empty()) throw InvalidArgument("cannot evaluate on an empty dataset");
  std::vector<double> losses(data.size());
  std::vector<char> correct(data.size());
  std::vector<std::exception_ptr> errors(data.size());
  const int threads = parallel::thread_limit();
#pragma omp parallel for schedule(dynamic, 8) num_threads(threads)
  for (std::size_t i = 0; i < data.size(); ++i) {
    try {
      const Tensor logp = autograd::forward(model.graph, data[i].x, model.params);
      losses[i] = cross_entropy(logp, data[i].label);
      correct[i] = predict(logp) == data[i].label;
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  EvalSummary s;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    s.loss += losses[i];
    hits += correct[i] ? 1 : 0;
  }
  s.loss /= static_cast<double>(data.size());
  s.accuracy = static_cast<double>(hits) / static_cast<double>(data.size());
  return s;
}

double evaluate(const models::Model& model, std::span<const LabeledInput> data) {
  return evaluate_inputs(model, data).accuracy;
}

double evaluate(const datakit::Classifier& classifier, std::span<const datakit::Example> data) {
  const auto inputs = encode_all(classifier, data);
  return evaluate(classifier.model, inputs);
}

nlohmann::json to_json(const TrainReport& r) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : r.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"train_accuracy", e.train_accuracy},
                      {"valid_loss", e.valid_loss},
                      {"valid_accuracy", e.valid_accuracy}});
  }
  return {{"epochs", epochs},
          {"best_epoch", r.best_epoch},
          {"best_valid_accuracy", r.best_valid_accuracy},
          {"train_size", r.train_size},
          {"valid_size", r.valid_size}};
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double valid_fraction,
                                                                            std::uint64_t seed) {
  if (n < 2) throw InvalidArgument("need at least 2 examples to split into train and valid");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng::Stream stream(rng::key(seed, kSplitStream));
  shuffle(order, stream);
  auto n_valid = static_cast<std::size_t>(std::llround(valid_fraction * static_cast<double>(n)));
  n_valid = std::clamp<std::size_t>(n_valid, 1, n - 1);
  std::vector<std::size_t> valid(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_valid));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_valid), order.end());
  return {std::move(train), std::move(valid)};
}

void sgd_step(autograd::ParamSet& params, const autograd::ParamSet& grads, double lr) { params.axpy(-lr, grads); }

Adam::Adam(const autograd::ParamSet& like, double lr, double beta1, double beta2, double epsilon)
    : m_(like.zeros_like()), v_(like.zeros_like()), lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

void Adam::step(autograd::ParamSet& params, const autograd::ParamSet& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto w = params.value(p).data();
    auto g = grads.value(p).data();
    auto m = m_.value(p).data();
    auto v = v_.value(p).data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + epsilon_);
    }
  }
}

TrainResult train(const models::ModelSpec& spec, std::span<const LabeledInput> data, const TrainConfig& config) {
  validate(config);
  models::validate(spec);
  if (data.empty()) throw InvalidArgument("training data is empty");
  std::set<std::size_t> classes;
  for (const auto& d : data) {
    if (d.label >= spec.num_classes) {
      throw InvalidArgument("label " + std::to_string(d.label) + " out of range for " +
                            std::to_string(spec.num_classes) + " classes");
    }
    classes.insert(d.label);
  }
  if (classes.size() < 2) throw InvalidArgument("training data contains a single class");

  const auto [train_idx, valid_idx] = split_indices(data.size(), config.valid_fraction, config.seed);
  std::vector<LabeledInput> train_set;
  std::vector<LabeledInput> valid_set;
  for (std::size_t i : train_idx) train_set.push_back(data[i]);
  for (std::size_t i : valid_idx) valid_set.push_back(data[i]);

  models::Model model = models::build_model(spec, config.seed);
  autograd::ParamSet best = model.params;
  std::optional<Adam> adam;
  if (config.optimizer == OptimizerKind::kAdam) {
    adam.emplace(model.params, config.learning_rate, config.beta1, config.beta2, config.epsilon);
  }

  TrainReport report;
  report.train_size = train_set.size();
  report.valid_size = valid_set.size();
  double best_acc = -1.0;
  double best_loss = 0.0;
  std::size_t since_best = 0;
  const std::size_t batch_size =
      config.batch_size == 0 ? train_set.size() : std::min(config.batch_size, train_set.size());

  std::vector<std::size_t> order(train_set.size());
  std::vector<Tensor> batch_x;
  std::vector<std::size_t> batch_y;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng::Stream stream(rng::key(config.seed, kShuffleStream, epoch));
    shuffle(order, stream);

    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), begin + batch_size);
      batch_x.clear();
      batch_y.clear();
      for (std::size_t k = begin; k < end; ++k) {
        batch_x.push_back(train_set[order[k]].x);
        batch_y.push_back(train_set[order[k]].label);
      }
      autograd::BatchOptions opts;
      opts.training = true;
      opts.dropout_key = rng::key(config.seed, kDropoutStream, epoch, batch_index);
      const auto lg = autograd::grad_params(model.graph, batch_x, batch_y, model.params, opts);
      if (adam) adam->step(model.params, lg.grads);
      else sgd_step(model.params, lg.grads, config.learning_rate);
    }

    const EvalSummary tr = evaluate_inputs(model, train_set);
    const EvalSummary va = evaluate_inputs(model, valid_set);
    report.epochs.push_back({epoch, tr.loss, tr.accuracy, va.loss, va.accuracy});
    if (va.accuracy > best_acc || (va.accuracy == best_acc && va.loss < best_loss)) {
      best_acc = va.accuracy;
      best_loss = va.loss;
      best = model.params;
      report.best_epoch = epoch;
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      break;
    }
  }
  report.best_valid_accuracy = best_acc;
  return {models::assemble_model(spec, std::move(best)), std::move(report)};
}

TrainResult train(const models::ModelSpec& spec, std::span<const datakit::Example> data,
                  std::shared_ptr<const models::EmbeddingTable> embeddings, const TrainConfig& config) {
  // The encoder only reads the spec, so any parameters will do.
  const datakit::Classifier encoder{models::build_model(spec, 0), std::move(embeddings)};
  const auto inputs = encode_all(encoder, data);
  return train(spec, inputs, config);
}

}  // namespace fisher_probe::trainer
