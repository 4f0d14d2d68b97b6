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

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fisher_probe/cli.hpp"

namespace {

namespace cli = fisher_probe::cli;

void add_data_flags(CLI::App* cmd, cli::DataOptions& d) {
  cmd->add_option("--data", d.data, "Dataset file (JSONL or TSV)");
  cmd->add_option("--format", d.format, "Dataset format")->check(CLI::IsMember({"jsonl", "tsv"}));
  cmd->add_option("--labels", d.labels, "Comma-separated class names in class-id order, e.g. neg,pos");
  cmd->add_option("--embeddings", d.embeddings, "Text embedding file (textcnn only)");
}

void add_train_flags(CLI::App* cmd, cli::TrainOverrides& t) {
  cmd->add_option("--optimizer", t.optimizer, "sgd or adam")->check(CLI::IsMember({"sgd", "adam"}));
  cmd->add_option("--lr", t.learning_rate, "Learning rate");
  cmd->add_option("--batch-size", t.batch_size, "Minibatch size; 0 means full batch");
  cmd->add_option("--epochs", t.epochs, "Training epochs");
  cmd->add_option("--patience", t.patience, "Stop after this many epochs without improvement; 0 disables");
  cmd->add_option("--valid-fraction", t.valid_fraction, "Held-out fraction for model selection");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Per-example difficulty scores from the Fisher information of a classifier.\n"
               "FISHER_PROBE_THREADS caps the number of worker threads."};
  app.require_subcommand(1);

  cli::TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  train_cmd->add_option("--model", train.model, "mlp or textcnn")->check(CLI::IsMember({"mlp", "textcnn"}));
  train_cmd->add_flag("--synthetic", train.synthetic, "Train the mlp on the two-gaussian mixture");
  train_cmd->add_option("--n-per-class", train.n_per_class, "Mixture points per class");
  train_cmd->add_option("--seed", train.seed, "Seed for sampling, initialization, shuffling and dropout");
  add_data_flags(train_cmd, train.data);
  add_train_flags(train_cmd, train.overrides);
  train_cmd->add_option("--out", train.out, "Checkpoint path");
  train_cmd->add_option("--report", train.report, "Training report path (default <out>.report.json)");

  cli::ScoreOptions score;
  auto* score_cmd = app.add_subcommand("score", "Score every example by the top Fisher eigenvalue");
  score_cmd->add_option("--checkpoint", score.checkpoint, "Checkpoint path")->required();
  add_data_flags(score_cmd, score.data);
  score_cmd->add_option("--out", score.out, "Scored JSONL path");
  score_cmd->add_flag("--sort", score.sort, "Order rows by lambda_max, largest first");
  score_cmd->add_flag("--top-eigvec", score.top_eigvec, "Include the unit-norm top eigenvector in each row");

  cli::PairsOptions pairs;
  auto* pairs_cmd = app.add_subcommand("pairs", "Score original/perturbed pairs and summarize the deltas");
  pairs_cmd->add_option("--checkpoint", pairs.checkpoint, "Checkpoint path")->required();
  pairs_cmd->add_option("--pairs", pairs.pairs, "Pairs JSONL")->required();
  pairs_cmd->add_option("--labels", pairs.labels, "Comma-separated class names");
  pairs_cmd->add_option("--embeddings", pairs.embeddings, "Text embedding file");
  pairs_cmd->add_option("--out-dir", pairs.out_dir, "Directory for pairs.jsonl, summary.json, histogram.csv");
  pairs_cmd->add_option("--threshold", pairs.threshold, "Delta threshold for the tail fractions");
  pairs_cmd->add_option("--bins", pairs.bins, "Histogram bins")->check(CLI::PositiveNumber);
  pairs_cmd->add_option("--overlap", pairs.overlap, "Scored JSONL of the base set; writes overlap.json");

  cli::SyntheticOptions synth;
  auto* synth_cmd = app.add_subcommand("synthetic", "Two-gaussian experiment: train, score, boundary distances");
  synth_cmd->add_option("--seed", synth.seed, "Seed");
  synth_cmd->add_option("--n-per-class", synth.n_per_class, "Points per class");
  add_train_flags(synth_cmd, synth.overrides);
  synth_cmd->add_option("--radius", synth.radius, "Search radius for the boundary distance");
  synth_cmd->add_option("--top", synth.top, "Rows in the eigenvector CSV");
  synth_cmd->add_option("--out-dir", synth.out_dir, "Output directory");

  cli::ServeOptions serve;
  auto* serve_cmd = app.add_subcommand("serve", "HTTP service for the explorer UI");
  serve_cmd->add_option("--checkpoint", serve.checkpoint, "Checkpoint path")->required();
  add_data_flags(serve_cmd, serve.data);
  serve_cmd->add_option("--scored", serve.scored, "Precomputed scored JSONL for --data");
  serve_cmd->add_option("--host", serve.host, "Bind address");
  serve_cmd->add_option("--port", serve.port, "Port")->check(CLI::Range(1, 65535));
  serve_cmd->add_option("--ig-steps", serve.attribution_steps, "Integrated-gradients steps")
      ->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  if (*train_cmd) return cli::cmd_train(train, std::cout, std::cerr);
  if (*score_cmd) return cli::cmd_score(score, std::cout, std::cerr);
  if (*pairs_cmd) return cli::cmd_pairs(pairs, std::cout, std::cerr);
  if (*synth_cmd) return cli::cmd_synthetic(synth, std::cout, std::cerr);
  return cli::cmd_serve(serve, std::cout, std::cerr);
}
