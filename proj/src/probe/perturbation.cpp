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
#include <numeric>
#include <optional>
#include <set>

#include <omp.h>

#include "fisher_probe/error.hpp"
#include "fisher_probe/parallel.hpp"
#include "fisher_probe/probe.hpp"

namespace fisher_probe::probe {

namespace {

struct PairOutcome {
  std::optional<PairedRecord> record;
  std::string error;
};

PairOutcome score_pair(const datakit::Classifier& classifier, const datakit::PairedExample& pair) {
  PairOutcome out;
  try {
    const datakit::Example original{pair.id, pair.original_text, std::nullopt, pair.original_label};
    const datakit::Example perturbed{pair.id, pair.perturbed_text, std::nullopt, pair.perturbed_label};
    const fim::FimResult a = fim::lambda_max(classifier, original);
    const fim::FimResult b = fim::lambda_max(classifier, perturbed);
    PairedRecord r;
    r.id = pair.id;
    r.lambda_original = a.lambda_max;
    r.lambda_perturbed = b.lambda_max;
    r.delta = b.lambda_max - a.lambda_max;
    r.prediction_original = a.prediction;
    r.prediction_perturbed = b.prediction;
    r.flipped = a.prediction != b.prediction;
    r.original_label = pair.original_label;
    r.perturbed_label = pair.perturbed_label;
    out.record = r;
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

PairReport merge(std::vector<PairOutcome>& outcomes, std::span<const datakit::PairedExample> pairs, double threshold) {
  PairReport report;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].record) report.records.push_back(std::move(*outcomes[i].record));
    else report.failures.push_back({pairs[i].id, std::move(outcomes[i].error)});
  }
  report.stats = delta_statistics(report.records, threshold);
  return report;
}

}  // namespace

std::vector<std::size_t> important_tokens(std::span<const double> scores, const ImportancePolicy& policy) {
  if (scores.empty()) throw InvalidArgument("no attribution scores to rank");
  std::vector<std::size_t> out;
  if (const auto* top = std::get_if<TopK>(&policy)) {
    if (top->k == 0) throw InvalidArgument("top_k needs k > 0");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return std::abs(scores[a]) > std::abs(scores[b]); });
    order.resize(std::min(top->k, order.size()));
    return order;
  }
  const double f = std::get<FractionOfMax>(policy).fraction;
  if (!(f > 0.0 && f <= 1.0)) throw InvalidArgument("fraction_of_max needs f in (0, 1]");
  double peak = 0.0;
  for (double s : scores) peak = std::max(peak, std::abs(s));
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::abs(scores[i]) >= f * peak) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> important_tokens(const AttributionResult& attr, const ImportancePolicy& policy) {
  return important_tokens(attr.token_scores, policy);
}

datakit::Example apply_substitutions(const datakit::Example& example, const SubstitutionSpec& subs) {
  if (example.is_point()) throw InvalidArgument("substitutions apply to text examples only");
  const auto tokens = datakit::tokenize(example.text);
  std::vector<const std::string*> replacement(tokens.size(), nullptr);
  for (const auto& s : subs) {
    if (s.position >= tokens.size()) {
      throw InvalidArgument("substitution position " + std::to_string(s.position) + " out of range for " +
                            std::to_string(tokens.size()) + " tokens");
    }
    if (replacement[s.position] != nullptr) {
      throw InvalidArgument("duplicate substitution position " + std::to_string(s.position));
    }
    replacement[s.position] = &s.replacement;
  }
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (replacement[i] == nullptr) {
      out.push_back(tokens[i]);
    } else {
      for (auto& t : datakit::tokenize(*replacement[i])) out.push_back(std::move(t));
    }
  }
  datakit::Example result = example;
  result.text = datakit::join_tokens(out);
  return result;
}

DeltaStats delta_statistics(std::span<const PairedRecord> records, double threshold) {
  DeltaStats s;
  s.threshold = threshold;
  s.count = records.size();
  if (records.empty()) return s;
  const double n = static_cast<double>(records.size());
  std::size_t le = 0;
  for (const auto& r : records) {
    s.mean += r.delta;
    s.mean_lambda_original += r.lambda_original;
    s.mean_lambda_perturbed += r.lambda_perturbed;
    if (r.delta <= threshold) ++le;
  }
  s.mean /= n;
  s.mean_lambda_original /= n;
  s.mean_lambda_perturbed /= n;
  double ss = 0.0;
  for (const auto& r : records) ss += (r.delta - s.mean) * (r.delta - s.mean);
  s.std = std::sqrt(ss / n);
  s.frac_le_threshold = static_cast<double>(le) / n;
  s.frac_gt_threshold = static_cast<double>(records.size() - le) / n;
  return s;
}

PairReport score_pairs_serial(const datakit::Classifier& classifier, std::span<const datakit::PairedExample> pairs,
                              double threshold) {
  if (pairs.empty()) throw InvalidArgument("no pairs to score");
  std::vector<PairOutcome> outcomes;
  outcomes.reserve(pairs.size());
  for (const auto& p : pairs) outcomes.push_back(score_pair(classifier, p));
  return merge(outcomes, pairs, threshold);
}

PairReport score_pairs(const datakit::Classifier& classifier, std::span<const datakit::PairedExample> pairs,
                       double threshold) {
  if (pairs.empty()) throw InvalidArgument("no pairs to score");
  std::vector<PairOutcome> outcomes(pairs.size());
  const int threads = parallel::thread_limit();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::size_t i = 0; i < pairs.size(); ++i) outcomes[i] = score_pair(classifier, pairs[i]);
  return merge(outcomes, pairs, threshold);
}

}  // namespace fisher_probe::probe
