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
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fisher_probe/datakit.hpp"
#include "fisher_probe/fim.hpp"
#include "fisher_probe/models.hpp"
#include "fisher_probe/tensor.hpp"

namespace fisher_probe::probe {

// ---------------------------------------------------------------------------
// Integrated Gradients

/// Scalar function of the input; writes its gradient into `grad`.
using ScalarField = std::function<double(const Tensor& x, Tensor& grad)>;

struct AttributionResult {
  Tensor attributions;              // shaped like the input
  std::vector<double> token_scores; // per real token (text) or coordinate (point)
  double output_delta = 0.0;        // F(x) - F(baseline)
  double completeness_residual = 0.0;
  std::size_t target_class = 0;
  std::size_t steps = 0;
};

/// Path integral from `baseline` to `x` with the trapezoid rule over
/// `steps` intervals. Gradients along the path are evaluated in parallel;
/// the weighted sum is taken in path order.
AttributionResult integrate_path(const ScalarField& field, const Tensor& x, const Tensor& baseline,
                                 std::size_t steps);

/// Single-threaded reference for integrate_path.
AttributionResult integrate_path_serial(const ScalarField& field, const Tensor& x, const Tensor& baseline,
                                        std::size_t steps);

/// F(x) = log p(target | x) for `model`.
ScalarField log_prob_field(const models::Model& model, std::size_t target);

enum class Baseline { kZero, kPad };

/// Attributions of log p(target) for one example. Token scores sum each
/// token's embedding coordinates; padding rows are dropped.
AttributionResult integrated_gradients(const datakit::Classifier& classifier, const datakit::Example& example,
                                       std::size_t target, std::size_t steps = 128,
                                       Baseline baseline = Baseline::kZero);

// ---------------------------------------------------------------------------
// Important-token selection

struct TopK {
  std::size_t k = 5;
};
struct FractionOfMax {
  double fraction = 0.5;
};
using ImportancePolicy = std::variant<TopK, FractionOfMax>;

/// top_k: k positions by |score| descending, earlier position first on ties.
/// fraction_of_max: positions with |score| >= f * max|score|, in order.
std::vector<std::size_t> important_tokens(std::span<const double> scores, const ImportancePolicy& policy);
std::vector<std::size_t> important_tokens(const AttributionResult& attr, const ImportancePolicy& policy);

// ---------------------------------------------------------------------------
// Word substitution

struct Substitution {
  std::size_t position = 0;
  std::string replacement;
};
using SubstitutionSpec = std::vector<Substitution>;

/// Replaces tokens of the tokenized text, re-joins with spaces. The
/// replacement may span several tokens.
datakit::Example apply_substitutions(const datakit::Example& example, const SubstitutionSpec& subs);

// ---------------------------------------------------------------------------
// Paired eigenvalue deltas

struct PairedRecord {
  std::string id;
  double lambda_original = 0.0;
  double lambda_perturbed = 0.0;
  double delta = 0.0;  // perturbed - original
  std::size_t prediction_original = 0;
  std::size_t prediction_perturbed = 0;
  bool flipped = false;
  std::size_t original_label = 0;
  std::size_t perturbed_label = 0;

  bool operator==(const PairedRecord&) const = default;
};

struct DeltaStats {
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;  // population (n divisor)
  double threshold = 0.0;
  double frac_le_threshold = 0.0;
  double frac_gt_threshold = 0.0;
  double mean_lambda_original = 0.0;
  double mean_lambda_perturbed = 0.0;

  bool operator==(const DeltaStats&) const = default;
};

struct PairFailure {
  std::string id;
  std::string message;

  bool operator==(const PairFailure&) const = default;
};

struct PairReport {
  std::vector<PairedRecord> records;
  DeltaStats stats;
  std::vector<PairFailure> failures;

  bool operator==(const PairReport&) const = default;
};

DeltaStats delta_statistics(std::span<const PairedRecord> records, double threshold = 0.0);

/// Scores both sides of every pair (in parallel, merged in input order).
PairReport score_pairs(const datakit::Classifier& classifier, std::span<const datakit::PairedExample> pairs,
                       double threshold = 0.0);

/// Single-threaded reference for score_pairs.
PairReport score_pairs_serial(const datakit::Classifier& classifier, std::span<const datakit::PairedExample> pairs,
                              double threshold = 0.0);

// ---------------------------------------------------------------------------
// Histogram overlap

struct OverlapReport {
  std::size_t bins = 0;
  double range_min = 0.0;
  double range_max = 0.0;
  std::vector<double> mass_a;
  std::vector<double> mass_b;
  double overlap_percent = 0.0;

  double bin_left(std::size_t i) const;
  double bin_right(std::size_t i) const;
};

/// Histogram intersection of two samples over a shared uniform binning of
/// their pooled range, as a percentage.
OverlapReport histogram_overlap(std::span<const double> a, std::span<const double> b, std::size_t bins = 50);

// ---------------------------------------------------------------------------
// Synthetic-task geometry

inline constexpr double kNoCrossing = std::numeric_limits<double>::infinity();

/// Distance from `point` to the p = 0.5 level set of a binary 2-d model,
/// searched along +/- the gradient of (logit_1 - logit_0). Returns the nearer
/// crossing, or kNoCrossing if neither ray crosses within `radius`.
double boundary_distance(const models::Model& model, const datakit::Point2& point, double radius = 20.0);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace fisher_probe::probe
