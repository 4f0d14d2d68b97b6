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
#include <cstdint>
#include <numeric>

#include "fisher_probe/error.hpp"
#include "fisher_probe/probe.hpp"

namespace fisher_probe::probe {

namespace {

std::vector<std::uint64_t> counts(std::span<const double> v, double lo, double hi, std::size_t bins) {
  std::vector<std::uint64_t> c(bins, 0);
  const double span = hi - lo;
  for (double x : v) {
    std::size_t i = 0;
    if (span > 0.0) {
      const double pos = std::floor((x - lo) / span * static_cast<double>(bins));
      i = pos <= 0.0 ? 0 : std::min(bins - 1, static_cast<std::size_t>(pos));
    }
    ++c[i];
  }
  return c;
}

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double OverlapReport::bin_left(std::size_t i) const {
  return range_min + (range_max - range_min) * static_cast<double>(i) / static_cast<double>(bins);
}

double OverlapReport::bin_right(std::size_t i) const {
  return i + 1 == bins ? range_max : bin_left(i + 1);
}

OverlapReport histogram_overlap(std::span<const double> a, std::span<const double> b, std::size_t bins) {
  if (a.empty() || b.empty()) throw InvalidArgument("histogram overlap needs two nonempty samples");
  if (bins == 0) throw InvalidArgument("histogram overlap needs at least one bin");
  double lo = a.front();
  double hi = a.front();
  for (auto sample : {a, b}) {
    for (double x : sample) {
      if (!std::isfinite(x)) throw InvalidArgument("histogram values must be finite");
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  OverlapReport r;
  r.bins = bins;
  r.range_min = lo;
  r.range_max = hi;
  const auto ca = counts(a, lo, hi, bins);
  const auto cb = counts(b, lo, hi, bins);
  const auto na = static_cast<std::uint64_t>(a.size());
  const auto nb = static_cast<std::uint64_t>(b.size());
  // Exact integer intersection: sum_i min(ca_i / na, cb_i / nb).
  std::uint64_t shared = 0;
  for (std::size_t i = 0; i < bins; ++i) {
    r.mass_a.push_back(static_cast<double>(ca[i]) / static_cast<double>(na));
    r.mass_b.push_back(static_cast<double>(cb[i]) / static_cast<double>(nb));
    shared += std::min(ca[i] * nb, cb[i] * na);
  }
  r.overlap_percent = 100.0 * static_cast<double>(shared) / static_cast<double>(na * nb);
  return r;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("spearman needs samples of equal length");
  if (a.size() < 2) throw InvalidArgument("spearman needs at least 2 observations");
  for (auto sample : {a, b}) {
    for (double x : sample) {
      if (std::isnan(x)) throw InvalidArgument("spearman input contains NaN");
    }
  }
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double mean = (n + 1.0) / 2.0;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - mean) * (rb[i] - mean);
    saa += (ra[i] - mean) * (ra[i] - mean);
    sbb += (rb[i] - mean) * (rb[i] - mean);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace fisher_probe::probe
