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

#include "fisher_probe/autograd.hpp"
#include "fisher_probe/error.hpp"
#include "fisher_probe/probe.hpp"

namespace fisher_probe::probe {

namespace {

constexpr std::size_t kScanSteps = 1000;
constexpr std::size_t kBisectIterations = 200;

double margin(const models::Model& model, const datakit::Point2& p) {
  const Tensor logp = autograd::forward(model.graph, Tensor::vector({p[0], p[1]}), model.params);
  return logp[1] - logp[0];
}

int sign(double v) { return (v > 0.0) - (v < 0.0); }

// First crossing along point + t * dir for t in (0, limit], or kNoCrossing.
double crossing_along(const models::Model& model, const datakit::Point2& point, const datakit::Point2& dir,
                      double radius, double limit, int start_sign) {
  auto at = [&](double t) { return margin(model, {point[0] + t * dir[0], point[1] + t * dir[1]}); };
  const double step = radius / static_cast<double>(kScanSteps);
  double lo = 0.0;
  for (std::size_t k = 1; k <= kScanSteps; ++k) {
    const double hi = step * static_cast<double>(k);
    if (lo >= limit) break;
    const double m = at(hi);
    if (m == 0.0) return hi;
    if (sign(m) != start_sign) {
      double a = lo;
      double b = hi;
      for (std::size_t it = 0; it < kBisectIterations && b - a > 1e-13 * std::max(1.0, b); ++it) {
        const double mid = 0.5 * (a + b);
        const double mm = at(mid);
        if (mm == 0.0) return mid;
        (sign(mm) == start_sign ? a : b) = mid;
      }
      return 0.5 * (a + b);
    }
    lo = hi;
  }
  return kNoCrossing;
}

}  // namespace

double boundary_distance(const models::Model& model, const datakit::Point2& point, double radius) {
  if (model.graph.input_shape() != Tensor::Shape{2} || model.num_classes() != 2) {
    throw InvalidArgument("boundary distance needs a binary model over 2-d points");
  }
  if (!(radius > 0.0)) throw InvalidArgument("search radius must be positive");
  const Tensor x = Tensor::vector({point[0], point[1]});
  const autograd::InputJacobian jac = autograd::input_jacobian(model.graph, x, model.params);
  const double p1 = std::exp(jac.log_probs[1]);
  if (std::abs(p1 - 0.5) < 1e-9) return 0.0;

  const double m0 = jac.log_probs[1] - jac.log_probs[0];
  datakit::Point2 g{jac.rows[1][0] - jac.rows[0][0], jac.rows[1][1] - jac.rows[0][1]};
  const double norm = std::hypot(g[0], g[1]);
  if (norm == 0.0) return kNoCrossing;
  g = {g[0] / norm, g[1] / norm};

  // Descending the margin's sign is the likely way to the boundary; search
  // it first, then the opposite ray only up to the best distance found.
  const int s0 = sign(m0);
  const datakit::Point2 toward{-s0 * g[0], -s0 * g[1]};
  const datakit::Point2 away{s0 * g[0], s0 * g[1]};
  const double near = crossing_along(model, point, toward, radius, radius, s0);
  const double far = crossing_along(model, point, away, radius, std::min(near, radius), s0);
  return std::min(near, far);
}

}  // namespace fisher_probe::probe
