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

#include <gtest/gtest.h>
#include <omp.h>

#include "fisher_probe/error.hpp"
#include "fisher_probe/fim.hpp"
#include "oracles.hpp"

namespace fisher_probe::fim {
namespace {

using testing::dense_eigenvalues;
using testing::dense_fisher;
using testing::random_mlp;
using testing::random_tensor;
using testing::random_textcnn;

std::vector<double> random_symmetric(rng::Stream& s, std::size_t n) {
  std::vector<double> a(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) a[i * n + j] = a[j * n + i] = s.normal();
  }
  return a;
}

TEST(JacobiTest, MatchesEigenAndReconstructs) {
  rng::Stream s(1);
  for (std::size_t n = 1; n <= 9; ++n) {
    const auto a = random_symmetric(s, n);
    const SymmetricEigen e = jacobi_eigen(a, n);
    Eigen::MatrixXd m = Eigen::Map<const Eigen::MatrixXd>(a.data(), n, n);
    const auto ref = dense_eigenvalues(m);
    for (std::size_t k = 0; k < n; ++k) EXPECT_NEAR(e.values[k], ref[k], 1e-12) << "n=" << n;
    for (std::size_t k = 0; k + 1 < n; ++k) EXPECT_GE(e.values[k], e.values[k + 1]);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double rec = 0.0;
        double ortho = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          rec += e.vector_entry(i, k) * e.values[k] * e.vector_entry(j, k);
          ortho += e.vector_entry(k, i) * e.vector_entry(k, j);
        }
        EXPECT_NEAR(rec, a[i * n + j], 1e-12);
        EXPECT_NEAR(ortho, i == j ? 1.0 : 0.0, 1e-12);
      }
    }
  }
}

TEST(JacobiTest, DiagonalNeedsNoSweeps) {
  const SymmetricEigen e = jacobi_eigen({1.0, 0.0, 0.0, 3.0}, 2);
  EXPECT_EQ(e.sweeps, 0u);
  EXPECT_EQ(e.values, (std::vector<double>{3.0, 1.0}));
}

TEST(JacobiTest, Errors) {
  EXPECT_THROW(jacobi_eigen({1.0, 2.0, 3.0}, 2), ShapeError);
  EXPECT_THROW(jacobi_eigen({1.0, 1.0, 1.0, 2.0}, 2, 1e-12, 0), ConvergenceError);
  EXPECT_THROW(jacobi_eigen({1.0, NAN, NAN, 2.0}, 2), NumericError);
}

TEST(FimTest, GramTrickMatchesDenseFisher) {
  rng::Stream s(2);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t c = 2 + trial % 4;
    const auto m = trial % 3 == 0 ? random_textcnn(s, 3, {2, 3}, 4, c)
                                  : random_mlp(s, {7, 9, c}, models::Activation::kTanh, 2.0);
    const Tensor x = trial % 3 == 0 ? random_tensor(s, {5, 3}) : random_tensor(s, {7});
    const LogProbJacobian jac = jacobian(m, x);
    const FimResult r = fim_spectrum(jac);
    const auto ref = dense_eigenvalues(dense_fisher(jac));
    EXPECT_NEAR(r.lambda_max, ref.front(), 1e-10 * std::max(1.0, ref.front()));
    for (std::size_t k = 0; k < c; ++k) EXPECT_NEAR(r.eigenvalues[k], std::max(ref[k], 0.0), 1e-10);
    for (std::size_t k = c - 1; k < ref.size(); ++k) EXPECT_LT(std::abs(ref[k]), 1e-10);
  }
}

TEST(FimTest, TopEigenvectorSatisfiesEigenEquation) {
  rng::Stream s(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = random_mlp(s, {6, 8, 3}, models::Activation::kRelu, 2.0);
    const LogProbJacobian jac = jacobian(m, random_tensor(s, {6}));
    const FimResult r = fim_spectrum(jac);
    const Eigen::MatrixXd g = dense_fisher(jac);
    const Eigen::Map<const Eigen::VectorXd> v(r.top_eigenvector.values().data(), 6);
    EXPECT_NEAR(v.norm(), 1.0, 1e-12);
    EXPECT_LT((g * v - r.lambda_max * v).norm(), 1e-10 * std::max(1.0, r.lambda_max));
    // Largest-magnitude coordinate is positive.
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(v[arg], 0.0);
  }
}

TEST(FimTest, LogisticClosedForm) {
  rng::Stream s(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> w(5);
    std::vector<double> x(5);
    for (auto& v : w) v = s.normal();
    for (auto& v : x) v = s.normal();
    const double b = s.normal();
    const auto m = testing::logistic_model(w, b);
    const FimResult r = fim_spectrum(jacobian(m, Tensor::vector(x)));
    EXPECT_NEAR(r.lambda_max, testing::logistic_lambda(w, b, x), 1e-12);
    const double cosine = dot(r.top_eigenvector.values(), w) / norm2(w);
    EXPECT_GT(std::abs(cosine), 1.0 - 1e-12);
    EXPECT_NEAR(r.eigenvalues[1], 0.0, 1e-12);
  }
}

TEST(FimTest, ScoreFunctionHasZeroMean) {
  rng::Stream s(5);
  const auto m = random_textcnn(s, 4, {1, 2}, 6, 4);
  const LogProbJacobian jac = jacobian(m, random_tensor(s, {6, 4}));
  for (std::size_t i = 0; i < jac.dim(); ++i) {
    double acc = 0.0;
    for (std::size_t y = 0; y < jac.classes(); ++y) acc += jac.probs[y] * jac.rows[y][i];
    EXPECT_NEAR(acc, 0.0, 1e-12);
  }
}

TEST(FimTest, MaskedCoordinatesAreExcluded) {
  rng::Stream s(6);
  const auto m = random_textcnn(s, 2, {2}, 4, 2);
  const Tensor x = random_tensor(s, {4, 2});
  const std::vector<std::uint8_t> mask{1, 1, 1, 1, 0, 0, 0, 0};
  const LogProbJacobian jac = jacobian(m, x, mask);
  for (const auto& row : jac.rows) {
    for (std::size_t i = 4; i < 8; ++i) EXPECT_EQ(row[i], 0.0);
  }
  const FimResult r = fim_spectrum(jac);
  for (std::size_t i = 4; i < 8; ++i) EXPECT_EQ(r.top_eigenvector[i], 0.0);
  EXPECT_THROW(jacobian(m, x, std::vector<std::uint8_t>{1, 0}), ShapeError);
}

TEST(FimTest, FlatSpectrumFallsBackToFirstUnmaskedCoordinate) {
  models::Model m = models::build_model(models::default_mlp_spec(), 0);
  for (std::size_t i = 0; i < m.params.size(); ++i) m.params.value(i).fill(0.0);
  const LogProbJacobian jac = jacobian(m, Tensor::vector({1.0, 2.0}), std::vector<std::uint8_t>{0, 1});
  const FimResult r = fim_spectrum(jac);
  EXPECT_EQ(r.lambda_max, 0.0);
  EXPECT_EQ(r.top_eigenvector, Tensor::vector({0.0, 1.0}));
  EXPECT_EQ(r.probs, (std::vector<double>{0.5, 0.5}));
}

TEST(FimTest, PaddingRowsDoNotChangeScore) {
  // Nonnegative embeddings and bias-free nonnegative filters: a window that
  // overlaps padding never beats a window of real tokens.
  models::ModelSpec spec = testing::small_textcnn_spec(3, {2, 3}, 4, 2);
  spec.conv_bias = false;
  models::Model m = models::build_model(spec, 1);
  rng::Stream s(7);
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    if (m.params[i].name.starts_with("conv")) {
      for (auto& v : m.params.value(i).data()) v = std::abs(v);
    } else {
      for (auto& v : m.params.value(i).data()) v = s.normal();
    }
  }
  auto table = std::make_shared<models::EmbeddingTable>(
      models::make_embedding_table({"w"}, {0.3, 0.7, 0.2}, 3));
  const datakit::Classifier c{m, table};
  const datakit::EncodedInput in = c.encode({"x", "w w w w", std::nullopt, 0});
  const FimResult base = lambda_max(m, in);
  datakit::EncodedInput padded = in;
  std::vector<double> values = in.x.values();
  values.resize(values.size() + 5 * 3, 0.0);
  padded.x = Tensor({in.x.dim(0) + 5, 3}, values);
  padded.mask.resize(padded.x.size(), 0);
  const FimResult more = lambda_max(m, padded);
  EXPECT_NEAR(more.lambda_max, base.lambda_max, 1e-14);
  EXPECT_GT(base.lambda_max, 0.0);
}

TEST(FimTest, QuadraticFormAgreesWithSpectralAndDense) {
  rng::Stream s(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = random_mlp(s, {5, 6, 4}, models::Activation::kTanh, 2.0);
    const LogProbJacobian jac = jacobian(m, random_tensor(s, {5}));
    const Tensor eta = random_tensor(s, {5});
    const double q = quadratic_form(jac, eta.values());
    const Eigen::Map<const Eigen::VectorXd> e(eta.values().data(), 5);
    EXPECT_NEAR(q, e.dot(dense_fisher(jac) * e), 1e-10 * std::max(1.0, q));
    EXPECT_NEAR(q, quadratic_form_spectral(jac, eta.values()), 1e-10 * std::max(1.0, q));
  }
}

TEST(FimTest, KlMatchesHalfQuadraticFormForSmallSteps) {
  rng::Stream s(9);
  const auto m = random_mlp(s, {4, 8, 3}, models::Activation::kTanh, 2.0);
  const Tensor x = random_tensor(s, {4});
  Tensor eta = random_tensor(s, {4});
  const double n = norm2(eta.values());
  for (auto& v : eta.data()) v *= 1e-3 / n;
  const KlCheck k = kl_quadratic_check(m, x, eta);
  EXPECT_GT(k.quad, 0.0);
  EXPECT_LT(std::abs(k.kl - k.quad) / k.quad, 0.01);
}

TEST(FimTest, KlDivergenceBasics) {
  const std::vector<double> p{std::log(0.25), std::log(0.75)};
  const std::vector<double> q{std::log(0.5), std::log(0.5)};
  EXPECT_EQ(kl_divergence(p, p), 0.0);
  EXPECT_NEAR(kl_divergence(p, q), 0.25 * std::log(0.5) + 0.75 * std::log(1.5), 1e-15);
  EXPECT_THROW(kl_divergence(p, std::vector<double>{0.0}), ShapeError);
}

TEST(FimTest, KlDivergenceResolvesNearbyDistributions) {
  // Two classes whose logits differ by delta: KL = p(1-p) delta^2 / 2 + O(delta^3).
  const double a = 0.4;
  const double delta = 1e-6;
  auto log_softmax2 = [](double z) {
    const double lse = std::log1p(std::exp(z));
    return std::vector<double>{-lse, z - lse};
  };
  const double p = 1.0 / (1.0 + std::exp(-a));
  const double expected = 0.5 * p * (1.0 - p) * delta * delta;
  const double kl = kl_divergence(log_softmax2(a), log_softmax2(a + delta));
  EXPECT_NEAR(kl, expected, 1e-5 * expected);
}

TEST(FimTest, KlDivergenceLargeShiftAndFloor) {
  const std::vector<double> p{std::log(0.9), std::log(0.1)};
  const std::vector<double> q{std::log(1e-3), std::log(1.0 - 1e-3)};
  EXPECT_NEAR(kl_divergence(p, q), 0.9 * std::log(0.9 / 1e-3) + 0.1 * std::log(0.1 / (1.0 - 1e-3)), 1e-14);
  const std::vector<double> tiny{-1000.0, 0.0};
  EXPECT_NEAR(kl_divergence(p, tiny), 0.9 * (std::log(0.9) - autograd::kLogProbFloor) + 0.1 * std::log(0.1), 1e-12);
}

TEST(FimTest, PerTokenScore) {
  rng::Stream s(10);
  const auto table = testing::random_embeddings(s, {"a", "b"}, 3);
  const datakit::Classifier c{random_textcnn(s, 3, {2}, 3, 2), table};
  const FimResult r = lambda_max(c, {"id7", "a b a", std::nullopt, 1});
  EXPECT_EQ(r.example_id, "id7");
  EXPECT_EQ(r.label, 1u);
  EXPECT_EQ(r.n_tokens, 3u);
  EXPECT_DOUBLE_EQ(r.lambda_max_per_token, r.lambda_max / 3.0);
}

TEST(ScoreTest, ParallelMatchesSerialAndRecordsFailures) {
  rng::Stream s(11);
  const auto table = testing::random_embeddings(s, {"a", "b", "c"}, 3);
  const datakit::Classifier c{random_textcnn(s, 3, {1, 2}, 3, 2), table};
  std::vector<datakit::Example> data;
  const char* texts[] = {"a b", "c", "a a c b", "!!", "", "b c a"};
  for (int i = 0; i < 60; ++i) data.push_back({std::to_string(i), texts[i % 6], std::nullopt, 0});
  const int saved = omp_get_max_threads();
  omp_set_num_threads(4);
  const auto par = score_dataset(c, data);
  omp_set_num_threads(saved);
  const auto ser = score_dataset_serial(c, data);
  EXPECT_EQ(par, ser);
  ASSERT_EQ(par.size(), 60u);
  EXPECT_FALSE(par[4].ok());
  EXPECT_NE(par[4].error.find("empty"), std::string::npos);
  EXPECT_TRUE(par[3].ok());
  EXPECT_THROW(score_dataset(c, {}), InvalidArgument);
}

}  // namespace
}  // namespace fisher_probe::fim
