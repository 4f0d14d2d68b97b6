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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fisher_probe/datakit.hpp"
#include "fisher_probe/models.hpp"
#include "fisher_probe/tensor.hpp"

namespace fisher_probe::fim {

/// Eigen-decomposition of a small dense symmetric matrix.
struct SymmetricEigen {
  std::size_t n = 0;
  std::vector<double> values;   // descending
  std::vector<double> vectors;  // row-major n x n; column k pairs with values[k]
  std::size_t sweeps = 0;

  double vector_entry(std::size_t row, std::size_t k) const { return vectors[row * n + k]; }
};

/// Cyclic Jacobi rotations. Converged when the off-diagonal Frobenius norm
/// falls below tolerance * max(1, ||A||_F) or stops decreasing between
/// sweeps (roundoff floor); throws ConvergenceError after `max_sweeps` sweeps.
SymmetricEigen jacobi_eigen(std::vector<double> matrix, std::size_t n, double tolerance = 1e-14,
                            std::size_t max_sweeps = 100);

/// Rows of the log-probability Jacobian over the flattened input.
///
/// rows[y][i] = d log p(y|x) / dx_i, with padding coordinates (mask 0)
/// zeroed.
struct LogProbJacobian {
  Tensor::Shape input_shape;
  std::vector<double> log_probs;
  std::vector<double> probs;
  std::vector<std::vector<double>> rows;
  std::vector<std::uint8_t> mask;

  std::size_t classes() const { return rows.size(); }
  std::size_t dim() const { return mask.size(); }
};

/// Empty mask = every coordinate included.
LogProbJacobian jacobian(const models::Model& model, const Tensor& x, std::span<const std::uint8_t> mask = {});

/// C x C matrix diag(sqrt p) J J^T diag(sqrt p), row-major. Its nonzero
/// eigenvalues are those of the D x D Fisher metric J^T diag(p) J.
std::vector<double> fisher_gram(const LogProbJacobian& jac);

/// Raw (unclamped) eigenpairs of fisher_gram.
SymmetricEigen gram_spectrum(const LogProbJacobian& jac);

struct FimResult {
  std::string example_id;
  std::size_t label = 0;
  double lambda_max = 0.0;
  std::vector<double> eigenvalues;  // descending, negatives clamped to 0
  Tensor top_eigenvector;           // unit norm, shaped like the input
  std::vector<double> probs;
  std::size_t prediction = 0;
  std::size_t n_tokens = 0;
  double lambda_max_per_token = 0.0;

  bool operator==(const FimResult&) const = default;
};

/// Spectrum of the Fisher metric via the Gram matrix. The top eigenvector is
/// J^T diag(sqrt p) u normalized, for the top Gram eigenvector u, with its
/// largest-magnitude coordinate made positive.
FimResult fim_spectrum(const LogProbJacobian& jac);

/// Difficulty score of one example: encode, Jacobian, spectrum.
FimResult lambda_max(const datakit::Classifier& classifier, const datakit::Example& example);

/// Difficulty score of an already encoded input.
FimResult lambda_max(const models::Model& model, const datakit::EncodedInput& input);

/// eta^T G eta = sum_y p_y (J_y . eta)^2.
double quadratic_form(const LogProbJacobian& jac, std::span<const double> eta);

/// eta^T G eta from the eigenpairs of G: sum_k lambda_k (v_k . eta)^2.
double quadratic_form_spectral(const LogProbJacobian& jac, std::span<const double> eta);

/// KL(p || q) from log-probabilities. log q is floored at kLogProbFloor.
double kl_divergence(std::span<const double> log_p, std::span<const double> log_q);

struct KlCheck {
  double kl = 0.0;    // exact KL(p(.|x) || p(.|x + eta))
  double quad = 0.0;  // 0.5 * eta^T G eta
};

KlCheck kl_quadratic_check(const models::Model& model, const Tensor& x, const Tensor& eta);

struct ScoreEntry {
  std::string id;
  std::optional<FimResult> result;
  std::string error;  // set when result is empty

  bool ok() const { return result.has_value(); }
  bool operator==(const ScoreEntry&) const = default;
};

/// One entry per example in input order. Examples are scored in parallel;
/// a failing example records its error and the rest continue.
std::vector<ScoreEntry> score_dataset(const datakit::Classifier& classifier, std::span<const datakit::Example> data);

/// Single-threaded reference for score_dataset.
std::vector<ScoreEntry> score_dataset_serial(const datakit::Classifier& classifier,
                                             std::span<const datakit::Example> data);

}  // namespace fisher_probe::fim
