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
#include <vector>

#include "fisher_probe/autograd.hpp"
#include "fisher_probe/error.hpp"
#include "fisher_probe/fim.hpp"
#include "fisher_probe/trainer.hpp"

namespace fisher_probe::fim {

namespace {

// Eigenvector of G paired with Gram eigenvector column k: J^T diag(sqrt p) u_k.
std::vector<double> lift(const LogProbJacobian& jac, const SymmetricEigen& eig, std::size_t k) {
  std::vector<double> v(jac.dim(), 0.0);
  for (std::size_t y = 0; y < jac.classes(); ++y) {
    const double w = std::sqrt(jac.probs[y]) * eig.vector_entry(y, k);
    if (w == 0.0) continue;
    const auto& row = jac.rows[y];
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += w * row[i];
  }
  return v;
}

void fix_sign(std::vector<double>& v) {
  std::size_t arg = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
  }
  if (!v.empty() && v[arg] < 0.0) {
    for (double& x : v) x = -x;
  }
}

}  // namespace

LogProbJacobian jacobian(const models::Model& model, const Tensor& x, std::span<const std::uint8_t> mask) {
  if (!mask.empty() && mask.size() != x.size()) {
    throw ShapeError("mask length " + std::to_string(mask.size()) + " does not match input size " +
                     std::to_string(x.size()));
  }
  auto full = autograd::input_jacobian(model.graph, x, model.params);
  LogProbJacobian jac;
  jac.input_shape = x.shape();
  jac.log_probs = full.log_probs.values();
  jac.probs.resize(jac.log_probs.size());
  for (std::size_t y = 0; y < jac.probs.size(); ++y) jac.probs[y] = std::exp(jac.log_probs[y]);
  jac.mask = mask.empty() ? std::vector<std::uint8_t>(x.size(), 1) : std::vector<std::uint8_t>(mask.begin(), mask.end());
  jac.rows.reserve(full.rows.size());
  for (auto& r : full.rows) {
    std::vector<double> row = r.values();
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (!jac.mask[i]) row[i] = 0.0;
    }
    jac.rows.push_back(std::move(row));
  }
  return jac;
}

std::vector<double> fisher_gram(const LogProbJacobian& jac) {
  const std::size_t c = jac.classes();
  std::vector<double> m(c * c, 0.0);
  for (std::size_t a = 0; a < c; ++a) {
    for (std::size_t b = a; b < c; ++b) {
      const double v = std::sqrt(jac.probs[a] * jac.probs[b]) * dot(jac.rows[a], jac.rows[b]);
      m[a * c + b] = m[b * c + a] = v;
    }
  }
  return m;
}

SymmetricEigen gram_spectrum(const LogProbJacobian& jac) { return jacobi_eigen(fisher_gram(jac), jac.classes()); }

FimResult fim_spectrum(const LogProbJacobian& jac) {
  const SymmetricEigen eig = gram_spectrum(jac);
  FimResult r;
  r.eigenvalues.resize(eig.values.size());
  std::transform(eig.values.begin(), eig.values.end(), r.eigenvalues.begin(),
                 [](double v) { return std::max(v, 0.0); });
  r.lambda_max = r.eigenvalues.empty() ? 0.0 : r.eigenvalues.front();
  r.probs = jac.probs;
  r.prediction = trainer::predict(Tensor::vector(jac.log_probs));

  std::vector<double> v = r.lambda_max > 0.0 ? lift(jac, eig, 0) : std::vector<double>(jac.dim(), 0.0);
  const double norm = norm2(v);
  if (norm > 0.0 && std::isfinite(norm)) {
    for (double& x : v) x /= norm;
  } else {
    // Flat spectrum: any unit vector is an eigenvector; take the first
    // unmasked coordinate.
    std::fill(v.begin(), v.end(), 0.0);
    const auto it = std::find(jac.mask.begin(), jac.mask.end(), std::uint8_t{1});
    v[it == jac.mask.end() ? 0 : static_cast<std::size_t>(it - jac.mask.begin())] = 1.0;
  }
  fix_sign(v);
  r.top_eigenvector = Tensor(jac.input_shape, std::move(v));
  return r;
}

FimResult lambda_max(const models::Model& model, const datakit::EncodedInput& input) {
  FimResult r = fim_spectrum(jacobian(model, input.x, input.mask));
  r.n_tokens = input.n_tokens;
  r.lambda_max_per_token = input.n_tokens > 0 ? r.lambda_max / static_cast<double>(input.n_tokens) : 0.0;
  return r;
}

FimResult lambda_max(const datakit::Classifier& classifier, const datakit::Example& example) {
  FimResult r = lambda_max(classifier.model, classifier.encode(example));
  r.example_id = example.id;
  r.label = example.label;
  return r;
}

double quadratic_form(const LogProbJacobian& jac, std::span<const double> eta) {
  if (eta.size() != jac.dim()) throw ShapeError("perturbation length does not match Jacobian width");
  double q = 0.0;
  for (std::size_t y = 0; y < jac.classes(); ++y) {
    const double s = dot(jac.rows[y], eta);
    q += jac.probs[y] * s * s;
  }
  return q;
}

double quadratic_form_spectral(const LogProbJacobian& jac, std::span<const double> eta) {
  if (eta.size() != jac.dim()) throw ShapeError("perturbation length does not match Jacobian width");
  const SymmetricEigen eig = gram_spectrum(jac);
  double q = 0.0;
  for (std::size_t k = 0; k < eig.n; ++k) {
    if (!(eig.values[k] > 0.0)) continue;
    std::vector<double> v = lift(jac, eig, k);
    const double norm = norm2(v);
    if (norm == 0.0) continue;
    const double proj = dot(v, eta) / norm;
    q += eig.values[k] * proj * proj;
  }
  return q;
}

namespace {

// exp(e) - 1 - e without cancellation for |e| <= 0.5.
double expm1_minus_linear(double e) {
  double term = e * e / 2.0;
  double sum = 0.0;
  for (int k = 3; k < 24 && term != 0.0; ++k) {
    sum += term;
    term *= e / k;
  }
  return sum;
}

}  // namespace

double kl_divergence(std::span<const double> log_p, std::span<const double> log_q) {
  if (log_p.size() != log_q.size()) throw ShapeError("distributions differ in length");
  // With d = log q - log p and e = d - E_p[d], KL = log E_p[exp(e)]. The
  // centered form keeps the second-order value free of first-order roundoff.
  std::vector<double> p(log_p.size());
  std::vector<double> d(log_p.size());
  double mean = 0.0;
  bool floored = false;
  for (std::size_t i = 0; i < log_p.size(); ++i) {
    p[i] = std::exp(log_p[i]);
    if (p[i] == 0.0) continue;
    floored = floored || log_q[i] < autograd::kLogProbFloor;
    d[i] = std::max(log_q[i], autograd::kLogProbFloor) - log_p[i];
    mean += p[i] * d[i];
  }
  if (floored || !std::isfinite(mean)) return std::max(-mean, 0.0);

  double largest = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (p[i] != 0.0) largest = std::max(largest, std::abs(d[i] - mean));
  }
  double kl = 0.0;
  if (largest <= 0.5) {
    double s = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (p[i] != 0.0) s += p[i] * expm1_minus_linear(d[i] - mean);
    }
    kl = std::log1p(s);
  } else {
    double s = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (p[i] != 0.0) s += p[i] * std::exp(d[i] - mean - largest);
    }
    kl = largest + std::log(s);
  }
  return std::max(kl, 0.0);
}

KlCheck kl_quadratic_check(const models::Model& model, const Tensor& x, const Tensor& eta) {
  if (eta.shape() != x.shape()) {
    throw ShapeError("perturbation shape " + shape_string(eta.shape()) + " does not match input " +
                     shape_string(x.shape()));
  }
  Tensor shifted = x;
  for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += eta[i];
  const LogProbJacobian jac = jacobian(model, x);
  const Tensor log_q = autograd::forward(model.graph, shifted, model.params);
  KlCheck out;
  out.kl = kl_divergence(jac.log_probs, log_q.data());
  out.quad = 0.5 * quadratic_form(jac, eta.data());
  return out;
}

}  // namespace fisher_probe::fim
