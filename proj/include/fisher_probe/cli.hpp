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

// Pipeline stages behind the `fisher_probe` subcommands. Each cmd_* returns
// the process exit code: 0 success, 1 processing failure, 2 unreadable or
// malformed input.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fisher_probe/datakit.hpp"
#include "fisher_probe/fim.hpp"
#include "fisher_probe/models.hpp"
#include "fisher_probe/trainer.hpp"

namespace fisher_probe::cli {

namespace fs = std::filesystem;

/// Where examples come from and how to read them.
struct DataOptions {
  std::optional<fs::path> data;
  std::string format = "jsonl";
  std::optional<std::string> labels;  // defaults to the checkpoint's labels
  std::optional<fs::path> embeddings;
};

/// Overrides on top of the per-model training defaults.
struct TrainOverrides {
  std::optional<std::string> optimizer;  // sgd | adam
  std::optional<double> learning_rate;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> patience;
  std::optional<double> valid_fraction;
};

struct TrainOptions {
  std::string model = "mlp";  // mlp | textcnn
  bool synthetic = false;
  std::size_t n_per_class = 500;
  std::uint64_t seed = 0;
  DataOptions data;
  TrainOverrides overrides;
  fs::path out = "model.ckpt";
  std::optional<fs::path> report;  // defaults to <out>.report.json
};

struct ScoreOptions {
  fs::path checkpoint;
  DataOptions data;
  fs::path out = "scored.jsonl";
  bool sort = false;
  bool top_eigvec = false;
};

struct PairsOptions {
  fs::path checkpoint;
  fs::path pairs;
  std::optional<std::string> labels;
  std::optional<fs::path> embeddings;
  fs::path out_dir = ".";
  double threshold = 0.0;
  std::size_t bins = 50;
  std::optional<fs::path> overlap;  // scored JSONL of the base set
};

struct SyntheticOptions {
  std::uint64_t seed = 0;
  std::size_t n_per_class = 500;
  TrainOverrides overrides;
  double radius = 20.0;
  std::size_t top = 20;
  fs::path out_dir = ".";
};

struct ServeOptions {
  fs::path checkpoint;
  DataOptions data;
  std::optional<fs::path> scored;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t attribution_steps = 128;
};

/// Everything the synthetic experiment produces, before it is written out.
struct SyntheticRun {
  std::vector<datakit::Example> points;
  trainer::TrainResult trained;
  trainer::TrainConfig config;
  std::vector<fim::FimResult> scores;
  std::vector<double> boundary_distances;
  std::vector<std::size_t> top;  // indices into points, largest lambda_max first
  double spearman = 0.0;
};

SyntheticRun run_synthetic(const SyntheticOptions& options);

/// Per-model defaults with `overrides` applied.
trainer::TrainConfig train_config(models::ModelKind kind, const TrainOverrides& overrides, std::uint64_t seed);

/// Classifier from a checkpoint, attaching and verifying embeddings for
/// text models.
datakit::Classifier load_classifier(const models::Checkpoint& checkpoint,
                                    const std::optional<fs::path>& embeddings);

/// Labels given on the command line, else those stored in the checkpoint,
/// else "0".."C-1".
datakit::LabelMap resolve_labels(const std::optional<std::string>& labels, const models::Checkpoint& checkpoint);

int cmd_train(const TrainOptions& options, std::ostream& out, std::ostream& err);
int cmd_score(const ScoreOptions& options, std::ostream& out, std::ostream& err);
int cmd_pairs(const PairsOptions& options, std::ostream& out, std::ostream& err);
int cmd_synthetic(const SyntheticOptions& options, std::ostream& out, std::ostream& err);
int cmd_serve(const ServeOptions& options, std::ostream& out, std::ostream& err);

}  // namespace fisher_probe::cli
