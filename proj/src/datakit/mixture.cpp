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

#include "fisher_probe/datakit.hpp"
#include "fisher_probe/error.hpp"
#include "fisher_probe/rng.hpp"

namespace fisher_probe::datakit {

std::vector<double> cholesky(std::span<const double> matrix, std::size_t n) {
  if (matrix.size() != n * n) throw ShapeError("cholesky expects an n x n matrix");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const double a = matrix[i * n + j];
      const double b = matrix[j * n + i];
      if (std::abs(a - b) > 1e-12 * std::max({1.0, std::abs(a), std::abs(b)})) {
        throw InvalidArgument("covariance matrix is not symmetric");
      }
    }
  }
  std::vector<double> lower(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = matrix[j * n + j];
    for (std::size_t k = 0; k < j; ++k) diag -= lower[j * n + k] * lower[j * n + k];
    if (!(diag > 0.0)) throw InvalidArgument("covariance matrix is not positive definite");
    const double ljj = std::sqrt(diag);
    lower[j * n + j] = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = matrix[i * n + j];
      for (std::size_t k = 0; k < j; ++k) v -= lower[i * n + k] * lower[j * n + k];
      lower[i * n + j] = v / ljj;
    }
  }
  return lower;
}

std::vector<Example> sample_mixture(const GaussianMixtureSpec& spec) {
  if (spec.n_per_class == 0) throw InvalidArgument("n_per_class must be positive");
  const auto l1 = cholesky(spec.sigma1, 2);
  const auto l2 = cholesky(spec.sigma2, 2);
  rng::Stream stream(rng::key(spec.seed, 0x6d6978ULL));
  std::vector<Example> out;
  out.reserve(2 * spec.n_per_class);
  const Point2* means[2] = {&spec.mu1, &spec.mu2};
  const std::vector<double>* factors[2] = {&l1, &l2};
  for (std::size_t cls = 0; cls < 2; ++cls) {
    const auto& mu = *means[cls];
    const auto& l = *factors[cls];
    for (std::size_t i = 0; i < spec.n_per_class; ++i) {
      const double z0 = stream.normal();
      const double z1 = stream.normal();
      Example ex;
      ex.id = "g" + std::to_string(cls) + "-" + std::to_string(i);
      ex.point = Point2{mu[0] + l[0] * z0, mu[1] + l[2] * z0 + l[3] * z1};
      ex.label = cls;
      out.push_back(std::move(ex));
    }
  }
  return out;
}

}  // namespace fisher_probe::datakit
