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

#include <omp.h>

#include "fisher_probe/error.hpp"
#include "fisher_probe/fim.hpp"
#include "fisher_probe/parallel.hpp"

namespace fisher_probe::fim {

namespace {

ScoreEntry score_one(const datakit::Classifier& classifier, const datakit::Example& example) {
  ScoreEntry entry;
  entry.id = example.id;
  try {
    entry.result = lambda_max(classifier, example);
  } catch (const std::exception& e) {
    entry.error = e.what();
  }
  return entry;
}

}  // namespace

std::vector<ScoreEntry> score_dataset_serial(const datakit::Classifier& classifier,
                                             std::span<const datakit::Example> data) {
  if (data.empty()) throw InvalidArgument("cannot score an empty dataset");
  std::vector<ScoreEntry> out;
  out.reserve(data.size());
  for (const auto& ex : data) out.push_back(score_one(classifier, ex));
  return out;
}

std::vector<ScoreEntry> score_dataset(const datakit::Classifier& classifier, std::span<const datakit::Example> data) {
  if (data.empty()) throw InvalidArgument("cannot score an empty dataset");
  std::vector<ScoreEntry> out(data.size());
  const int threads = parallel::thread_limit();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::size_t i = 0; i < data.size(); ++i) out[i] = score_one(classifier, data[i]);
  return out;
}

}  // namespace fisher_probe::fim
