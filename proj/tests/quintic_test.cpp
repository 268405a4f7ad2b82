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

#include <gtest/gtest.h>

#include "cavsim/controller.hpp"
#include "cavsim/feasibility.hpp"
#include "cavsim/quintic.hpp"
#include "test_support.hpp"

namespace cavsim {
namespace {

using testing::for_all;
using testing::Gen;

BoundaryState random_boundary(Gen& g) {
  return {g.uniform(-1e4, 1e4), g.uniform(0.0, 40.0), g.uniform(-4.0, 4.0),
          g.uniform(-4.0, 8.0), g.uniform(-2.0, 2.0), g.uniform(-4.0, 4.0)};
}

TEST(Quintic, MinimumJerkCoefficients) {
  const auto seg = solve_segment({0, 0, 0, 0, 0, 0}, {1, 0, 0, 0, 0, 0}, 1.0, 0.0);
  const auto c = seg.coeffs_x();
  const double expected[6] = {0, 0, 0, 10, -15, 6};
  for (int k = 0; k < 6; ++k) EXPECT_NEAR(c[k], expected[k], 1e-12) << "k=" << k;
}

TEST(Quintic, MinimumJerkMidpoint) {
  const auto seg = solve_segment({0, 0, 0, 0, 0, 0}, {1, 0, 0, 0, 0, 0}, 1.0, 0.0);
  const auto k = seg.eval(0.5);
  // 10/8 - 15/16 + 6/32 and 30/4 - 60/8 + 30/16.
  EXPECT_NEAR(k.x, 0.5, 1e-12);
  EXPECT_NEAR(k.vx, 1.875, 1e-12);
}

TEST(Quintic, ZeroBoundariesGiveZeroPolynomial) {
  const auto seg = solve_segment({}, {}, 3.0, 0.0);
  for (double c : seg.coeffs_x()) EXPECT_EQ(c, 0.0);
  for (double c : seg.coeffs_y()) EXPECT_EQ(c, 0.0);
}

TEST(Quintic, ConstantSpeedIsLinear) {
  const double v = 17.0, T = 6.0;
  const auto c = solve_segment({0, v, 0, 0, 0, 0}, {v * T, v, 0, 0, 0, 0}, T, 0.0).coeffs_x();
  EXPECT_NEAR(c[1], v, 1e-12);
  for (int k : {0, 2, 3, 4, 5}) EXPECT_NEAR(c[k], 0.0, 1e-12);
}

TEST(Quintic, RejectsNonPositiveDuration) {
  EXPECT_THROW(solve_segment({}, {}, 0.0, 0.0), std::domain_error);
  EXPECT_THROW(solve_segment({}, {}, -1.0, 0.0), std::domain_error);
}

TEST(Quintic, EvalOutsideWindowThrows) {
  const auto seg = solve_segment({}, {1, 0, 0, 0, 0, 0}, 2.0, 5.0);
  EXPECT_THROW(static_cast<void>(seg.eval(4.9)), std::domain_error);
  EXPECT_THROW(static_cast<void>(seg.eval(7.1)), std::domain_error);
  EXPECT_NO_THROW(static_cast<void>(seg.eval(7.0)));
}

TEST(QuinticProperty, EndpointsReproduced) {
  for_all(1000, 1, [](Gen& g) {
    const auto a = random_boundary(g);
    auto b = random_boundary(g);
    const double T = g.uniform(0.4, 20.0);
    b.x = a.x + g.uniform(-5.0, 45.0) * T;
    const double t0 = g.uniform(-100.0, 100.0);
    const auto seg = solve_segment(a, b, T, t0);
    const auto s = seg.start_state();
    const auto e = seg.end_state();
    const double scale = std::max(1.0, std::abs(a.x) + std::abs(b.x)) * 1e-13;
    EXPECT_NEAR(s.x, a.x, 1e-9 + scale);
    EXPECT_NEAR(s.vx, a.vx, 1e-9);
    EXPECT_NEAR(s.ax, a.ax, 1e-9);
    EXPECT_NEAR(e.x, b.x, 1e-9 + scale);
    EXPECT_NEAR(e.vx, b.vx, 1e-9);
    EXPECT_NEAR(e.ax, b.ax, 1e-9);
    EXPECT_NEAR(s.y, a.y, 1e-9);
    EXPECT_NEAR(e.y, b.y, 1e-9);
    EXPECT_NEAR(e.vy, b.vy, 1e-9);
    EXPECT_NEAR(e.ay, b.ay, 1e-9);
  });
}

TEST(QuinticProperty, DerivativesMatchFiniteDifferences) {
  constexpr double h = 1e-5;
  for_all(300, 2, [](Gen& g) {
    BoundaryState a = random_boundary(g), b = random_boundary(g);
    const double T = g.uniform(0.4, 20.0);
    b.x = a.x + g.uniform(-5.0, 45.0) * T;
    const auto seg = solve_segment(a, b, T, 0.0);
    const double t = g.uniform(h, T - h);
    const auto m = seg.eval(t), lo = seg.eval(t - h), hi = seg.eval(t + h);
    EXPECT_NEAR((hi.x - lo.x) / (2 * h), m.vx, 1e-4);
    EXPECT_NEAR((hi.vx - lo.vx) / (2 * h), m.ax, 1e-4);
    EXPECT_NEAR((hi.ax - lo.ax) / (2 * h), m.jx, 1e-4);
    EXPECT_NEAR((hi.y - lo.y) / (2 * h), m.vy, 1e-4);
    EXPECT_NEAR((hi.vy - lo.vy) / (2 * h), m.ay, 1e-4);
  });
}

TEST(QuinticProperty, RestrictionIsTheSamePolynomial) {
  for_all(300, 3, [](Gen& g) {
    const auto seg = solve_segment(random_boundary(g), random_boundary(g), g.uniform(2.0, 12.0), 1.0);
    const double a = g.uniform(seg.t_start(), seg.t_end() - 0.5);
    const double b = std::min(seg.t_end(), a + g.uniform(0.3, 3.0));
    const auto piece = restrict_trajectory(Trajectory({seg}), a, b);
    ASSERT_EQ(piece.size(), 1u);
    for (double t = a; t <= b; t += 0.05) {
      const auto p = piece[0].eval(t), q = seg.eval(t);
      EXPECT_NEAR(p.vx, q.vx, 1e-7);
      EXPECT_NEAR(p.ax, q.ax, 1e-6);
      EXPECT_NEAR(p.jx, q.jx, 1e-4);
    }
  });
}

TEST(QuinticProperty, ChainedSegmentsAreC2) {
  for_all(200, 4, [](Gen& g) {
    std::vector<QuinticSegment> segs;
    BoundaryState s = random_boundary(g);
    double t = 0.0;
    for (int i = 0; i < 5; ++i) {
      BoundaryState e = random_boundary(g);
      e.x = s.x + g.uniform(0, 300);
      const double T = g.uniform(0.4, 10.0);
      segs.push_back(solve_segment(s, e, T, t));
      s = e;
      t += T;
    }
    EXPECT_LT(Trajectory(segs).max_junction_mismatch(), 1e-9);
  });
}

TEST(Trajectory, RejectsGaps) {
  const auto a = solve_segment({}, {}, 1.0, 0.0);
  const auto b = solve_segment({}, {}, 1.0, 1.5);
  EXPECT_THROW(Trajectory({a, b}), std::invalid_argument);
}

TEST(Trajectory, LaterSegmentWinsAtJunction) {
  const auto a = solve_segment({}, {}, 1.0, 0.0, SubAction::kWait);
  const auto b = solve_segment({}, {}, 1.0, 1.0, SubAction::kMerge);
  const Trajectory tr({a, b});
  EXPECT_EQ(tr.segment_at(1.0).sub_action(), SubAction::kMerge);
  EXPECT_EQ(tr.segment_at(0.99).sub_action(), SubAction::kWait);
}

TEST(Trajectory, BallisticSegmentHasConstantAcceleration) {
  const auto seg = ballistic_segment({10, 5, 0, 0, 0, 0}, -1.5, 2.0, 0.0);
  for (double t : {0.0, 0.7, 2.0}) {
    EXPECT_NEAR(seg.eval(t).ax, -1.5, 1e-12);
    EXPECT_NEAR(seg.eval(t).vx, 5 - 1.5 * t, 1e-12);
  }
  EXPECT_NEAR(seg.end_state().x, 10 + 10 - 3, 1e-12);
}

// Feasibility checks on single segments.

TEST(Feasibility, RightLaneSpeedLimitIsInclusive) {
  const PlanLimits lim = PlanLimits::from({});
  const auto seg = solve_segment({0, 20, 0, 0, 0, 0}, {200, 20, 0, 0, 0, 0}, 10.0, 0.0);
  EXPECT_TRUE(check_segment(seg, lim, {}, 0.1, 3.5, 0.55).feasible);
  const auto fast = solve_segment({0, 20.5, 0, 0, 0, 0}, {205, 20.5, 0, 0, 0, 0}, 10.0, 0.0);
  EXPECT_EQ(check_segment(fast, lim, {}, 0.1, 3.5, 0.55).violation, Violation::kSpeed);
}

TEST(Feasibility, AccelerationBound) {
  const PlanLimits lim = PlanLimits::from({});
  // Smoothstep from 0 to dv over T peaks at 1.5 dv / T = 2.5.
  const double T = 6.0, dv = 2.5 * T / 1.5;
  const auto seg = solve_segment({0, 0, 0, 0, 0, 0}, {T * dv / 2, dv, 0, 0, 0, 0}, T, 0.0);
  const auto r = check_segment(seg, lim, {}, 0.01, 0.0, 0.0);
  EXPECT_FALSE(r.feasible);
  EXPECT_EQ(r.violation, Violation::kAccel);
  EXPECT_NEAR(std::abs(r.value), 2.0, 0.05);
}

TEST(Feasibility, LeaderGap) {
  const PlanLimits lim = PlanLimits::from({});
  LeaderPrediction p;
  PredictedTrack leader;
  leader.x0 = 65.0;  // rear at 60
  leader.v0 = 0.0;
  p.leader[lane_index(Lane::kRight)] = leader;
  KinematicSample k;
  k.vx = 20.0;
  const auto r = check_sample(k, lim, p, 3.5, 0.55);
  EXPECT_EQ(r.violation, Violation::kGap);
  EXPECT_NEAR(r.value, 60.0, 1e-12);
  EXPECT_NEAR(r.limit, 70.0, 1e-12);
  k.vx = 17.0;  // 59.5 < 60
  EXPECT_TRUE(check_sample(k, lim, p, 3.5, 0.55).feasible);
}

TEST(Feasibility, BothLeadersBindWhileCrossing) {
  const PlanLimits lim = PlanLimits::from({});
  LeaderPrediction p;
  PredictedTrack left;
  left.x0 = 30.0;
  p.leader[lane_index(Lane::kLeft)] = left;
  KinematicSample k;
  k.vx = 10.0;
  k.y = 0.0;
  EXPECT_TRUE(check_sample(k, lim, p, 3.5, 0.55).feasible);
  k.y = 1.0;
  EXPECT_EQ(check_sample(k, lim, p, 3.5, 0.55).violation, Violation::kGap);
}

TEST(FeasibilityProperty, RelaxingLimitsNeverHurts) {
  for_all(300, 5, [](Gen& g) {
    PlanLimits tight = PlanLimits::from({});
    const auto seg = solve_segment({0, g.uniform(0, 25), g.uniform(-2, 2), 0, 0, 0},
                                   {g.uniform(20, 200), g.uniform(0, 25), 0, 0, 0, 0}, g.uniform(1, 10), 0.0);
    PlanLimits loose = tight;
    loose.a_max += g.uniform(0, 2);
    loose.j_max += g.uniform(0, 2);
    loose.v_max_right += g.uniform(0, 5);
    loose.v_max_left += g.uniform(0, 5);
    if (check_segment(seg, tight, {}, 0.1, 0, 0).feasible) {
      EXPECT_TRUE(check_segment(seg, loose, {}, 0.1, 0, 0).feasible);
    }
  });
}

}  // namespace
}  // namespace cavsim
