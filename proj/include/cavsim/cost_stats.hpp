// Copyright 2026 The cavsim Authors
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

/// @file cost_stats.hpp
/// @brief Fuel/time cost model, per-trip cost accounting and the two-sample
///        t-test used to compare controllers.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "cavsim/parameters.hpp"

namespace cavsim {

struct CostParams {
  double eta_f = 5.98e-8;  // dollars per joule
  double eta_t = 0.0;      // dollars per second
  double gamma_ar = 0.3987;
  double gamma_rr = 281.547;
  double gamma_gr = 0.0;
  double gamma_ir = 1750.0;
  double beta_free = 1.0;
  double beta_platoon = 0.9;
  double beta_transition = 0.95;

  static CostParams from(const ModelParams& p, double vot_per_hour) {
    return {p.eta_f,    vot_per_hour / 3600.0, p.gamma_ar,    p.gamma_rr,         p.gamma_gr,
            p.gamma_ir, p.beta_free,           p.beta_platoon, p.beta_transition};
  }
};

/// Traction power [W] at speed v and acceleration a; braking is free.
inline double traction_power(double v, double a, const CostParams& c) {
  return (c.gamma_ar * v * v + c.gamma_rr + c.gamma_gr + c.gamma_ir * std::max(a, 0.0)) * v;
}

struct CostBreakdown {
  double energy = 0.0;  // platoon-weighted traction energy [J]
  double fuel_dollars = 0.0;
  double time_dollars = 0.0;
  double distance = 0.0;  // [m]

  [[nodiscard]] double total() const { return fuel_dollars + time_dollars; }

  /// Cost scaled to a 10 km trip; absent when no distance was covered.
  [[nodiscard]] std::optional<double> per_10km() const {
    if (!(distance > 0.0)) return std::nullopt;
    return total() * (10000.0 / distance);
  }
  [[nodiscard]] std::optional<double> fuel_per_10km() const {
    if (!(distance > 0.0)) return std::nullopt;
    return fuel_dollars * (10000.0 / distance);
  }

  CostBreakdown& operator+=(const CostBreakdown& o) {
    energy += o.energy;
    fuel_dollars += o.fuel_dollars;
    time_dollars += o.time_dollars;
    distance += o.distance;
    return *this;
  }
};

/// One sample of a vehicle trace at the update rate.
struct TraceSample {
  double t = 0.0;
  double v = 0.0;
  double a = 0.0;
  double beta = 1.0;
};

/// Trapezoidal cost of a uniformly sampled trace.
inline CostBreakdown vehicle_trip_cost(const std::vector<TraceSample>& trace, const CostParams& c) {
  if (trace.empty()) throw std::domain_error("empty trace");
  CostBreakdown out;
  for (std::size_t i = 1; i < trace.size(); ++i) {
    const auto& p = trace[i - 1];
    const auto& q = trace[i];
    const double dt = q.t - p.t;
    const double e0 = p.beta * traction_power(p.v, p.a, c);
    const double e1 = q.beta * traction_power(q.v, q.a, c);
    out.energy += 0.5 * (e0 + e1) * dt;
    out.distance += 0.5 * (p.v + q.v) * dt;
  }
  const double duration = trace.back().t - trace.front().t;
  out.fuel_dollars = c.eta_f * out.energy;
  out.time_dollars = c.eta_t * duration;
  return out;
}

/// Mean per-10 km cost over a set of traces; traces without distance are
/// skipped. Absent when no trace qualifies.
inline std::optional<double> upstream_mean_cost(const std::vector<std::vector<TraceSample>>& traces,
                                                const CostParams& c, bool fuel_only = false) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& tr : traces) {
    if (tr.size() < 2) continue;
    const auto cost = vehicle_trip_cost(tr, c);
    const auto v = fuel_only ? cost.fuel_per_10km() : cost.per_10km();
    if (!v) continue;
    sum += *v;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

struct SampleSet {
  std::string label;
  std::vector<double> values;

  [[nodiscard]] double mean() const {
    if (values.empty()) throw std::domain_error("empty sample");
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  }
  /// Unbiased sample variance.
  [[nodiscard]] double variance() const {
    if (values.size() < 2) throw std::domain_error("variance needs two values");
    const double m = mean();
    double ss = 0.0;
    for (double v : values) ss += (v - m) * (v - m);
    return ss / static_cast<double>(values.size() - 1);
  }
};

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
  bool significant = false;  // p < 0.05
  bool degenerate = false;   // zero variance with unequal means
};

/// Two-tailed two-sample t-test. Pooled variance by default; `welch`
/// switches to the unequal-variance statistic with Satterthwaite df.
inline TTestResult t_test_two_tailed(const SampleSet& a, const SampleSet& b, bool welch = false) {
  const std::size_t na = a.values.size(), nb = b.values.size();
  if (na < 2 || nb < 2) throw std::invalid_argument("each sample needs at least two values");
  const double ma = a.mean(), mb = b.mean();
  const double va = a.variance(), vb = b.variance();
  const double fa = static_cast<double>(na), fb = static_cast<double>(nb);
  TTestResult r;
  double se2;
  if (welch) {
    se2 = va / fa + vb / fb;
    const double num = se2 * se2;
    const double den = (va / fa) * (va / fa) / (fa - 1) + (vb / fb) * (vb / fb) / (fb - 1);
    r.df = den > 0.0 ? num / den : fa + fb - 2;
  } else {
    r.df = fa + fb - 2;
    const double pooled = ((fa - 1) * va + (fb - 1) * vb) / r.df;
    se2 = pooled * (1.0 / fa + 1.0 / fb);
  }
  const double diff = ma - mb;
  if (!(se2 > 0.0)) {
    if (diff == 0.0) return r;
    r.t = diff > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.p = 0.0;
    r.significant = true;
    r.degenerate = true;
    return r;
  }
  r.t = diff / std::sqrt(se2);
  const boost::math::students_t dist(r.df);
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  r.significant = r.p < 0.05;
  return r;
}

}  // namespace cavsim
