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
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fisher_probe/autograd.hpp"
#include "fisher_probe/datakit.hpp"
#include "fisher_probe/models.hpp"

namespace fisher_probe::trainer {

using autograd::cross_entropy;

enum class OptimizerKind { kSgd, kAdam };

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 32;  // 0 = full batch
  std::size_t epochs = 5;
  std::uint64_t seed = 0;
  double valid_fraction = 0.1;
  std::size_t patience = 0;  // epochs without improvement before stopping; 0 = never
};

/// Full-batch SGD, lr 0.1, 200 epochs.
TrainConfig default_mlp_config();
/// Adam, lr 1e-3, batch 32, 5 epochs.
TrainConfig default_textcnn_config();

void validate(const TrainConfig& config);
nlohmann::json to_json(const TrainConfig& config);

struct LabeledInput {
  Tensor x;
  std::size_t label = 0;
};

/// Encodes every example; throws on the first one that cannot be encoded.
std::vector<LabeledInput> encode_all(const datakit::Classifier& classifier, std::span<const datakit::Example> data);

struct EvalSummary {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Index of the largest log-probability; ties go to the lower class id.
std::size_t predict(const Tensor& log_probs);

/// Mean floored cross-entropy and argmax accuracy in inference mode.
EvalSummary evaluate_inputs(const models::Model& model, std::span<const LabeledInput> data);

/// Fraction of examples whose argmax prediction equals the label.
double evaluate(const models::Model& model, std::span<const LabeledInput> data);
double evaluate(const datakit::Classifier& classifier, std::span<const datakit::Example> data);

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double valid_loss = 0.0;
  double valid_accuracy = 0.0;

  bool operator==(const EpochStats&) const = default;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;
  double best_valid_accuracy = 0.0;
  std::size_t train_size = 0;
  std::size_t valid_size = 0;

  bool operator==(const TrainReport&) const = default;
};

nlohmann::json to_json(const TrainReport& report);

struct TrainResult {
  models::Model model;
  TrainReport report;
};

/// Trains from scratch and returns the parameters of the epoch with the
/// best validation accuracy. Ties go to the lower validation loss, then to
/// the earlier epoch.
TrainResult train(const models::ModelSpec& spec, std::span<const LabeledInput> data, const TrainConfig& config);

/// Encodes `data` with `embeddings` (text models) and trains.
TrainResult train(const models::ModelSpec& spec, std::span<const datakit::Example> data,
                  std::shared_ptr<const models::EmbeddingTable> embeddings, const TrainConfig& config);

/// Deterministic train/valid split: returns (train indices, valid indices).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double valid_fraction,
                                                                            std::uint64_t seed);

/// params -= lr * grads.
void sgd_step(autograd::ParamSet& params, const autograd::ParamSet& grads, double lr);

class Adam {
 public:
  Adam(const autograd::ParamSet& like, double lr, double beta1, double beta2, double epsilon);
  void step(autograd::ParamSet& params, const autograd::ParamSet& grads);

 private:
  autograd::ParamSet m_;
  autograd::ParamSet v_;
  double lr_, beta1_, beta2_, epsilon_;
  std::uint64_t t_ = 0;
};

}  // namespace fisher_probe::trainer
