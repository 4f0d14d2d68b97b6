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

// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "fisher_probe/autograd.hpp"
#include "fisher_probe/datakit.hpp"
#include "fisher_probe/fim.hpp"
#include "fisher_probe/models.hpp"
#include "fisher_probe/probe.hpp"
#include "fisher_probe/rng.hpp"

namespace fp = fisher_probe;

namespace {

struct TextFixture {
  fp::datakit::Classifier classifier;
  std::vector<fp::datakit::Example> examples;
};

const TextFixture& text_fixture() {
  static const TextFixture fixture = [] {
    fp::rng::Stream s(7);
    std::vector<std::string> words;
    for (int i = 0; i < 200; ++i) words.push_back("w" + std::to_string(i));
    const std::size_t dim = 50;
    std::vector<double> values(words.size() * dim);
    for (auto& v : values) v = s.normal();
    auto table = std::make_shared<fp::models::EmbeddingTable>(
        fp::models::make_embedding_table(words, std::move(values), dim));
    TextFixture f{{fp::models::build_model(fp::models::default_textcnn_spec(dim, 2), 1), table}, {}};
    for (int i = 0; i < 64; ++i) {
      std::string text;
      for (int t = 0; t < 60; ++t) text += words[s.below(words.size())] + " ";
      f.examples.push_back({"e" + std::to_string(i), text, std::nullopt, static_cast<std::size_t>(i % 2)});
    }
    return f;
  }();
  return fixture;
}

void BM_ScoreDatasetSerial(benchmark::State& state) {
  const auto& f = text_fixture();
  for (auto _ : state) benchmark::DoNotOptimize(fp::fim::score_dataset_serial(f.classifier, f.examples));
}
BENCHMARK(BM_ScoreDatasetSerial)->Unit(benchmark::kMillisecond);

void BM_ScoreDatasetParallel(benchmark::State& state) {
  const auto& f = text_fixture();
  for (auto _ : state) benchmark::DoNotOptimize(fp::fim::score_dataset(f.classifier, f.examples));
}
BENCHMARK(BM_ScoreDatasetParallel)->Unit(benchmark::kMillisecond);

struct Batch {
  std::vector<fp::Tensor> inputs;
  std::vector<std::size_t> labels;
};

const Batch& batch() {
  static const Batch b = [] {
    const auto& f = text_fixture();
    Batch out;
    for (const auto& e : f.examples) {
      out.inputs.push_back(f.classifier.encode(e).x);
      out.labels.push_back(e.label);
    }
    return out;
  }();
  return b;
}

void BM_GradParamsSerial(benchmark::State& state) {
  const auto& m = text_fixture().classifier.model;
  const fp::autograd::BatchOptions opts{true, 3};
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        fp::autograd::grad_params_serial(m.graph, batch().inputs, batch().labels, m.params, opts));
  }
}
BENCHMARK(BM_GradParamsSerial)->Unit(benchmark::kMillisecond);

void BM_GradParamsParallel(benchmark::State& state) {
  const auto& m = text_fixture().classifier.model;
  const fp::autograd::BatchOptions opts{true, 3};
  for (auto _ : state) {
    benchmark::DoNotOptimize(fp::autograd::grad_params(m.graph, batch().inputs, batch().labels, m.params, opts));
  }
}
BENCHMARK(BM_GradParamsParallel)->Unit(benchmark::kMillisecond);

void BM_IntegratedGradientsSerial(benchmark::State& state) {
  const auto& m = text_fixture().classifier.model;
  const auto field = fp::probe::log_prob_field(m, 1);
  const fp::Tensor& x = batch().inputs.front();
  const fp::Tensor base(x.shape());
  for (auto _ : state) benchmark::DoNotOptimize(fp::probe::integrate_path_serial(field, x, base, 128));
}
BENCHMARK(BM_IntegratedGradientsSerial)->Unit(benchmark::kMillisecond);

void BM_IntegratedGradientsParallel(benchmark::State& state) {
  const auto& m = text_fixture().classifier.model;
  const auto field = fp::probe::log_prob_field(m, 1);
  const fp::Tensor& x = batch().inputs.front();
  const fp::Tensor base(x.shape());
  for (auto _ : state) benchmark::DoNotOptimize(fp::probe::integrate_path(field, x, base, 128));
}
BENCHMARK(BM_IntegratedGradientsParallel)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
