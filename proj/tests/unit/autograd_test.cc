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
#include <numeric>

#include <gtest/gtest.h>
#include <omp.h>

#include "fisher_probe/autograd.hpp"
#include "fisher_probe/error.hpp"
#include "oracles.hpp"

namespace fisher_probe::autograd {
namespace {

using testing::fd_input_grad;
using testing::fd_param_grad;
using testing::random_mlp;
using testing::random_tensor;
using testing::random_textcnn;
using testing::relative_error;

// y = log_softmax(x W + b) with W [2,2].
struct TinyLinear {
  Graph graph;
  ParamSet params;
  TinyLinear() {
    params.add("w", Tensor::matrix(2, 2, {1.0, -1.0, 0.5, 2.0}));
    params.add("b", Tensor::vector({0.1, -0.2}));
    const NodeId x = graph.input({2});
    graph.set_output(graph.log_softmax(graph.add(graph.matmul(x, graph.param(0)), graph.param(1))));
  }
};

TEST(AutogradTest, ForwardMatchesHandComputation) {
  const TinyLinear net;
  const Tensor logp = forward(net.graph, Tensor::vector({1.0, 2.0}), net.params);
  // logits = [1 + 1 + 0.1, -1 + 4 - 0.2] = [2.1, 2.8]
  const double lse = std::log(std::exp(2.1) + std::exp(2.8));
  EXPECT_NEAR(logp[0], 2.1 - lse, 1e-15);
  EXPECT_NEAR(logp[1], 2.8 - lse, 1e-15);
}

TEST(AutogradTest, InputGradientOfLinearSoftmax) {
  const TinyLinear net;
  const Tensor x = Tensor::vector({1.0, 2.0});
  const Tensor logp = forward(net.graph, x, net.params);
  const double p1 = std::exp(logp[1]);
  // d log p0 / dx = W[:,0] - sum_c p_c W[:,c]
  const Tensor g = grad_input(net.graph, x, net.params, 0);
  EXPECT_NEAR(g[0], 1.0 - ((1 - p1) * 1.0 + p1 * -1.0), 1e-14);
  EXPECT_NEAR(g[1], 0.5 - ((1 - p1) * 0.5 + p1 * 2.0), 1e-14);
}

TEST(AutogradTest, LogSoftmaxNormalizes) {
  rng::Stream s(1);
  const auto m = random_mlp(s, {5, 7, 4}, models::Activation::kTanh, 3.0);
  for (int i = 0; i < 20; ++i) {
    const Tensor logp = forward(m.graph, random_tensor(s, {5}, 2.0), m.params);
    double total = 0.0;
    for (double v : logp.values()) total += std::exp(v);
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(AutogradTest, InputGradientMatchesFiniteDifferencesMlp) {
  rng::Stream s(2);
  for (int trial = 0; trial < 30; ++trial) {
    const auto act = trial % 2 == 0 ? models::Activation::kTanh : models::Activation::kRelu;
    const auto m = random_mlp(s, {4, 8, 6, 3}, act);
    const Tensor x = random_tensor(s, {4});
    for (std::size_t y = 0; y < 3; ++y) {
      const Tensor g = grad_input(m.graph, x, m.params, y);
      EXPECT_LT(relative_error(g.values(), fd_input_grad(m, x, y).values()), 1e-6) << "trial " << trial;
    }
  }
}

TEST(AutogradTest, InputGradientMatchesFiniteDifferencesTextCnn) {
  rng::Stream s(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = random_textcnn(s, 3, {1, 2, 3}, 4, 2);
    const Tensor x = random_tensor(s, {6, 3});
    const Tensor g = grad_input(m.graph, x, m.params, 1);
    EXPECT_LT(relative_error(g.values(), fd_input_grad(m, x, 1).values()), 1e-6) << "trial " << trial;
  }
}

TEST(AutogradTest, JacobianRowsMatchGradInput) {
  rng::Stream s(4);
  const auto m = random_textcnn(s, 2, {2}, 3, 3);
  const Tensor x = random_tensor(s, {4, 2});
  const InputJacobian jac = input_jacobian(m.graph, x, m.params);
  ASSERT_EQ(jac.rows.size(), 3u);
  for (std::size_t y = 0; y < 3; ++y) EXPECT_EQ(jac.rows[y], grad_input(m.graph, x, m.params, y));
}

TEST(AutogradTest, ParamGradientMatchesFiniteDifferences) {
  rng::Stream s(5);
  const auto m = random_textcnn(s, 3, {2, 3}, 3, 2);
  std::vector<Tensor> batch;
  std::vector<std::size_t> labels;
  for (int i = 0; i < 4; ++i) {
    batch.push_back(random_tensor(s, {5, 3}));
    labels.push_back(static_cast<std::size_t>(i % 2));
  }
  BatchOptions opts;
  opts.training = true;
  opts.dropout_key = 77;
  const LossGradient lg = grad_params_serial(m.graph, batch, labels, m.params, opts);
  for (std::size_t t = 0; t < m.params.size(); ++t) {
    const std::size_t n = m.params.value(t).size();
    for (std::size_t k = 0; k < n; k += std::max<std::size_t>(1, n / 5)) {
      const double fd = fd_param_grad(m, batch, labels, t, k, opts);
      EXPECT_NEAR(lg.grads.value(t)[k], fd, 1e-6 * std::max(1.0, std::abs(fd))) << m.params[t].name << "[" << k << "]";
    }
  }
}

TEST(AutogradTest, ParallelBatchGradientIsBitIdenticalToSerial) {
  rng::Stream s(6);
  const auto m = random_mlp(s, {2, 16, 2}, models::Activation::kTanh);
  std::vector<Tensor> batch;
  std::vector<std::size_t> labels;
  for (int i = 0; i < 150; ++i) {
    batch.push_back(random_tensor(s, {2}));
    labels.push_back(static_cast<std::size_t>(i % 2));
  }
  const int saved = omp_get_max_threads();
  omp_set_num_threads(4);
  const LossGradient par = grad_params(m.graph, batch, labels, m.params);
  omp_set_num_threads(saved);
  const LossGradient ser = grad_params_serial(m.graph, batch, labels, m.params);
  EXPECT_EQ(par.loss, ser.loss);
  EXPECT_EQ(par.grads, ser.grads);
}

TEST(AutogradTest, DropoutIsIdentityAtInference) {
  rng::Stream s(7);
  models::ModelSpec spec = testing::small_textcnn_spec(3, {2}, 5, 2);
  spec.dropout = 0.9;
  const auto m = models::build_model(spec, 1);
  const Tensor x = random_tensor(s, {4, 3});
  const Trace a = evaluate(m.graph, x, m.params);
  const Trace b = evaluate(m.graph, x, m.params, {false, 123});
  EXPECT_EQ(a.output(m.graph), b.output(m.graph));
}

TEST(AutogradTest, DropoutMaskDependsOnlyOnKey) {
  rng::Stream s(8);
  const auto m = random_textcnn(s, 3, {2}, 50, 2);
  const Tensor x = random_tensor(s, {4, 3});
  const Tensor a = evaluate(m.graph, x, m.params, {true, 1}).output(m.graph);
  const Tensor b = evaluate(m.graph, x, m.params, {true, 1}).output(m.graph);
  const Tensor c = evaluate(m.graph, x, m.params, {true, 2}).output(m.graph);
  const Tensor inference = forward(m.graph, x, m.params);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  EXPECT_NE(a, inference);
}

TEST(AutogradTest, DropoutKeepsExpectedActivation) {
  Graph g;
  ParamSet params;
  const NodeId x = g.input({1000});
  g.set_output(g.dropout(x, 0.5));
  Tensor in({1000});
  in.fill(1.0);
  const Trace t = evaluate(g, in, params, {true, 99});
  const auto& out = t.output(g).values();
  std::size_t kept = 0;
  for (double v : out) {
    ASSERT_TRUE(v == 0.0 || v == 2.0);
    kept += v != 0.0;
  }
  EXPECT_NEAR(static_cast<double>(kept) / 1000.0, 0.5, 0.06);
}

TEST(AutogradTest, MaxOverTimeRoutesGradientToArgmax) {
  Graph g;
  ParamSet params;
  const NodeId x = g.input({0, 2});
  g.set_output(g.max_over_time(x));
  const Tensor in = Tensor::matrix(3, 2, {1.0, 5.0, 3.0, 2.0, -1.0, 4.0});
  const Trace t = evaluate(g, in, params);
  EXPECT_EQ(t.output(g), Tensor::vector({3.0, 5.0}));
  Tensor grad;
  backpropagate(g, t, params, Tensor::vector({10.0, 20.0}), &grad, nullptr);
  EXPECT_EQ(grad, Tensor::matrix(3, 2, {0.0, 20.0, 10.0, 0.0, 0.0, 0.0}));
}

TEST(AutogradTest, Conv1dMatchesDirectSum) {
  Graph g;
  ParamSet params;
  params.add("w", Tensor({2, 1, 1}, {2.0, -1.0}));
  params.add("b", Tensor::vector({0.5}));
  const NodeId x = g.input({0, 1});
  g.set_output(g.conv1d(x, g.param(0), g.param(1)));
  const Trace t = evaluate(g, Tensor::matrix(4, 1, {1.0, 2.0, 4.0, 8.0}), params);
  EXPECT_EQ(t.output(g), Tensor::matrix(3, 1, {0.5, 0.5, 0.5}));
}

TEST(AutogradTest, Conv1dRejectsShortInput) {
  rng::Stream s(9);
  const auto m = random_textcnn(s, 2, {3}, 2, 2);
  EXPECT_THROW(forward(m.graph, Tensor({2, 2}), m.params), ShapeError);
}

TEST(AutogradTest, InputShapeIsChecked) {
  rng::Stream s(10);
  const auto mlp = random_mlp(s, {3, 2}, models::Activation::kTanh);
  EXPECT_THROW(forward(mlp.graph, Tensor({4}), mlp.params), ShapeError);
  const auto cnn = random_textcnn(s, 2, {1}, 2, 2);
  EXPECT_THROW(forward(cnn.graph, Tensor({5, 3}), cnn.params), ShapeError);
  EXPECT_NO_THROW(forward(cnn.graph, Tensor({7, 2}), cnn.params));
}

TEST(AutogradTest, NonFiniteInputIsReported) {
  const TinyLinear net;
  EXPECT_THROW(forward(net.graph, Tensor::vector({std::nan(""), 0.0}), net.params), NumericError);
}

TEST(AutogradTest, BuilderRejectsUnknownNodes) {
  Graph g;
  g.input({2});
  EXPECT_THROW(g.tanh(5), InvalidArgument);
  EXPECT_THROW(g.input({2}), InvalidArgument);
  EXPECT_THROW(g.dropout(0, 1.0), InvalidArgument);
  EXPECT_THROW(g.concat({}), InvalidArgument);
}

TEST(AutogradTest, CrossEntropyIsFloored) {
  const Tensor logp = Tensor::vector({-1e-30, -80.0});
  EXPECT_NEAR(cross_entropy(logp, 0), 1e-30, 1e-40);
  EXPECT_DOUBLE_EQ(cross_entropy(logp, 1), -kLogProbFloor);
  EXPECT_THROW(cross_entropy(logp, 2), InvalidArgument);
}

TEST(AutogradTest, BatchValidation) {
  const TinyLinear net;
  std::vector<Tensor> batch{Tensor::vector({0.0, 0.0})};
  std::vector<std::size_t> labels{0, 1};
  EXPECT_THROW(grad_params(net.graph, batch, labels, net.params), InvalidArgument);
  EXPECT_THROW(grad_params(net.graph, {}, {}, net.params), InvalidArgument);
}

TEST(ParamSetTest, AxpyScaleAndLookup) {
  ParamSet a;
  a.add("w", Tensor::vector({1.0, 2.0}));
  ParamSet b = a.zeros_like();
  EXPECT_EQ(b.value(0), Tensor::vector({0.0, 0.0}));
  b.axpy(2.0, a);
  b.scale(0.5);
  EXPECT_EQ(b.value(0), a.value(0));
  EXPECT_EQ(a.index_of("w"), 0u);
  EXPECT_THROW(a.index_of("v"), InvalidArgument);
  EXPECT_EQ(a.scalar_count(), 2u);
}

}  // namespace
}  // namespace fisher_probe::autograd
