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

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "cavsim/cost_stats.hpp"
#include "test_support.hpp"

namespace cavsim {
namespace {

using testing::for_all;
using testing::Gen;

std::vector<TraceSample> cruise(double v, double seconds, double beta = 1.0, double dt = 0.4) {
  std::vector<TraceSample> out;
  const auto n = static_cast<int>(std::lround(seconds / dt));
  for (int i = 0; i <= n; ++i) out.push_back({i * dt, v, 0.0, beta});
  return out;
}

std::vector<TraceSample> random_trace(Gen& g, int n) {
  std::vector<TraceSample> out;
  double v = g.uniform(0, 30);
  for (int i = 0; i < n; ++i) {
    const double a = g.uniform(-3, 2);
    const double beta = g.coin() ? 1.0 : 0.9;
    out.push_back({i * 0.4, v, a, beta});
    v = std::max(0.0, v + a * 0.4);
  }
  return out;
}

TEST(Cost, CruiseFuel) {
  const auto c = CostParams::from(ModelParams{}, 0.0);
  // (0.3987 * 400 + 281.547) * 20 W over 10 s.
  const auto r = vehicle_trip_cost(cruise(20, 10), c);
  EXPECT_NEAR(r.fuel_dollars, 0.00527468, 1e-8);
  EXPECT_NEAR(r.distance, 200.0, 1e-9);
  EXPECT_EQ(r.time_dollars, 0.0);
}

TEST(Cost, PlatoonDragFactor) {
  const auto c = CostParams::from(ModelParams{}, 0.0);
  EXPECT_NEAR(vehicle_trip_cost(cruise(20, 10, 0.9), c).fuel_dollars, 0.00474721, 1e-8);
}

TEST(Cost, TimeValue) {
  const auto c = CostParams::from(ModelParams{}, 20.0);
  EXPECT_NEAR(vehicle_trip_cost(cruise(20, 10), c).time_dollars, 0.0555556, 1e-7);
}

TEST(Cost, LongCruise) {
  const auto c = CostParams::from(ModelParams{}, 0.0);
  const auto r = vehicle_trip_cost(cruise(20, 500), c);
  EXPECT_NEAR(r.fuel_dollars, 0.263734, 1e-6);
  EXPECT_NEAR(*r.fuel_per_10km(), 0.263734, 1e-6);  // exactly 10 km
}

TEST(Cost, StandstillHasNoPerDistanceValue) {
  const auto c = CostParams::from(ModelParams{}, 20.0);
  const auto r = vehicle_trip_cost(cruise(0, 30), c);
  EXPECT_FALSE(r.per_10km().has_value());
  EXPECT_FALSE(r.fuel_per_10km().has_value());
  EXPECT_GT(r.time_dollars, 0.0);
}

TEST(Cost, EmptyTraceRejected) {
  EXPECT_THROW(vehicle_trip_cost({}, CostParams{}), std::domain_error);
}

TEST(Cost, UpstreamMeanSkipsStoppedVehicles) {
  const auto c = CostParams::from(ModelParams{}, 0.0);
  EXPECT_FALSE(upstream_mean_cost({}, c).has_value());
  EXPECT_FALSE(upstream_mean_cost({cruise(0, 10)}, c).has_value());
  const auto m = upstream_mean_cost({cruise(20, 10), cruise(0, 10), cruise(20, 10, 0.9)}, c, true);
  ASSERT_TRUE(m.has_value());
  const double per10 = 0.00527468 * 50;
  EXPECT_NEAR(*m, 0.5 * (per10 + 0.9 * per10), 1e-6);
}

TEST(CostProperty, BrakingHasNoInertiaTerm) {
  const CostParams c;
  for_all(500, 31, [&](Gen& g) {
    const double v = g.uniform(0, 35);
    EXPECT_EQ(traction_power(v, -g.uniform(0, 5), c), traction_power(v, 0.0, c));
    EXPECT_GE(traction_power(v, g.uniform(0, 3), c), traction_power(v, 0.0, c));
  });
}

TEST(CostProperty, TraceSplitsAdd) {
  const auto c = CostParams::from(ModelParams{}, 17.0);
  for_all(300, 32, [&](Gen& g) {
    const auto tr = random_trace(g, g.integer(3, 80));
    const auto cut = static_cast<std::size_t>(g.integer(1, static_cast<int>(tr.size()) - 2));
    std::vector<TraceSample> head(tr.begin(), tr.begin() + static_cast<long>(cut) + 1);
    std::vector<TraceSample> tail(tr.begin() + static_cast<long>(cut), tr.end());
    auto parts = vehicle_trip_cost(head, c);
    parts += vehicle_trip_cost(tail, c);
    const auto whole = vehicle_trip_cost(tr, c);
    EXPECT_NEAR(parts.energy, whole.energy, 1e-9 * (1 + whole.energy));
    EXPECT_NEAR(parts.distance, whole.distance, 1e-9 * (1 + whole.distance));
    EXPECT_NEAR(parts.total(), whole.total(), 1e-12 * (1 + whole.total()));
  });
}

TEST(CostProperty, FuelIndependentOfTimeValue) {
  for_all(300, 33, [&](Gen& g) {
    const auto tr = random_trace(g, g.integer(2, 60));
    const double vot = g.uniform(0, 60);
    const auto a = vehicle_trip_cost(tr, CostParams::from(ModelParams{}, 0.0));
    const auto b = vehicle_trip_cost(tr, CostParams::from(ModelParams{}, vot));
    EXPECT_EQ(a.fuel_dollars, b.fuel_dollars);
    EXPECT_NEAR(b.time_dollars, vot / 3600.0 * (tr.back().t - tr.front().t), 1e-12);
  });
}

TEST(CostProperty, PlatoonFactorScalesEnergy) {
  const CostParams c;
  for_all(300, 34, [&](Gen& g) {
    auto tr = random_trace(g, g.integer(2, 60));
    const double beta = g.uniform(0.5, 1.0);
    for (auto& s : tr) s.beta = 1.0;
    const double free = vehicle_trip_cost(tr, c).energy;
    for (auto& s : tr) s.beta = beta;
    EXPECT_NEAR(vehicle_trip_cost(tr, c).energy, beta * free, 1e-9 * (1 + free));
  });
}

// --- t-test ----------------------------------------------------------------

TEST(TTest, WorkedExample) {
  const SampleSet a{"a", {1, 2, 3, 4, 5}};
  const SampleSet b{"b", {3, 4, 5, 6, 7}};
  const auto r = t_test_two_tailed(a, b);
  EXPECT_NEAR(r.t, -2.0, 1e-12);
  EXPECT_EQ(r.df, 8.0);
  EXPECT_NEAR(r.p, 0.0805162, 1e-6);
  EXPECT_FALSE(r.significant);
  const auto w = t_test_two_tailed(a, b, true);
  EXPECT_NEAR(w.t, -2.0, 1e-12);
  EXPECT_NEAR(w.df, 8.0, 1e-12);  // equal variances and sizes
}

TEST(TTest, IdenticalSamples) {
  const SampleSet a{"a", {1, 2, 3}};
  const auto r = t_test_two_tailed(a, a);
  EXPECT_EQ(r.t, 0.0);
  EXPECT_EQ(r.p, 1.0);
  EXPECT_FALSE(r.significant);
}

TEST(TTest, ZeroVarianceWithDifferentMeans) {
  const auto r = t_test_two_tailed({"a", {1, 1, 1}}, {"b", {2, 2, 2}});
  EXPECT_TRUE(r.degenerate);
  EXPECT_TRUE(r.significant);
  EXPECT_EQ(r.p, 0.0);
  EXPECT_LT(r.t, 0.0);
  EXPECT_FALSE(t_test_two_tailed({"a", {4, 4}}, {"b", {4, 4}}).degenerate);
}

TEST(TTest, NeedsTwoValuesPerSample) {
  EXPECT_THROW(t_test_two_tailed({"a", {1}}, {"b", {1, 2}}), std::invalid_argument);
  EXPECT_THROW(static_cast<void>(SampleSet{}.mean()), std::domain_error);
}

TEST(TTestProperty, SwappingSamplesFlipsSign) {
  for_all(300, 35, [](Gen& g) {
    SampleSet a{"a", {}}, b{"b", {}};
    const int na = g.integer(2, 40), nb = g.integer(2, 40);
    for (int i = 0; i < na; ++i) a.values.push_back(g.uniform(0, 10));
    for (int i = 0; i < nb; ++i) b.values.push_back(g.uniform(1, 12));
    for (bool welch : {false, true}) {
      const auto ab = t_test_two_tailed(a, b, welch);
      const auto ba = t_test_two_tailed(b, a, welch);
      EXPECT_NEAR(ab.t, -ba.t, 1e-12 * (1 + std::abs(ab.t)));
      EXPECT_NEAR(ab.p, ba.p, 1e-12);
      EXPECT_GE(ab.p, 0.0);
      EXPECT_LE(ab.p, 1.0);
      EXPECT_EQ(ab.significant, ab.p < 0.05);
    }
  });
}

TEST(TTestProperty, ShiftAndScaleInvariant) {
  for_all(300, 36, [](Gen& g) {
    SampleSet a{"a", {}}, b{"b", {}};
    for (int i = 0; i < 10; ++i) {
      a.values.push_back(g.uniform(0, 10));
      b.values.push_back(g.uniform(0, 10));
    }
    const double shift = g.uniform(-100, 100), scale = g.uniform(0.1, 10);
    SampleSet a2 = a, b2 = b;
    for (auto& v : a2.values) v = v * scale + shift;
    for (auto& v : b2.values) v = v * scale + shift;
    EXPECT_NEAR(t_test_two_tailed(a, b).t, t_test_two_tailed(a2, b2).t, 1e-8);
  });
}

}  // namespace
}  // namespace cavsim
