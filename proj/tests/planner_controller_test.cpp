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

#include <memory>
#include <string>

#include <gtest/gtest.h>

#include "cavsim/controller.hpp"
#include "cavsim/experiment.hpp"
#include "cavsim/planner.hpp"
#include "test_support.hpp"

namespace cavsim {
namespace {

using testing::for_all;
using testing::Gen;

Planner make_planner(double eta_scale = 1.0, double vot = 0.0) {
  const ModelParams mp;
  CostParams c = CostParams::from(mp, vot);
  c.eta_f *= eta_scale;
  return Planner(PlanLimits::from(mp), c, PlannerSettings::from(mp));
}

PlanRequest free_request(const RoadNetwork& net, double v, double x = 0.0) {
  PlanRequest req;
  req.start = BoundaryState{x, v, 0.0, 0.0, 0.0, 0.0};
  req.t_start = 0.0;
  req.mode = SubjectMode::kRightFree;
  req.prediction.t0 = 0.0;
  req.prediction.horizon = 10.0;
  req.network = &net;
  return req;
}

TEST(SegmentCost, CruiseMatchesTraceCost) {
  const auto c = CostParams::from(ModelParams{}, 20.0);
  const auto seg = solve_segment({0, 20, 0, 0, 0, 0}, {200, 20, 0, 0, 0, 0}, 10.0, 0.0, SubAction::kWait);
  const auto r = segment_cost(seg, 1.0, c);
  EXPECT_NEAR(r.fuel_dollars, 0.00527468, 1e-8);
  EXPECT_NEAR(r.time_dollars, 0.0555556, 1e-7);
  EXPECT_NEAR(r.distance, 200.0, 1e-9);
  EXPECT_NEAR(segment_cost(seg, 0.9, c).fuel_dollars, 0.00474721, 1e-8);
}

TEST(ActionMask, BlocksListedSubActions) {
  const ActionMask none{false, false, false};
  EXPECT_TRUE(none.allows(sequence(SubjectMode::kRightFree, TargetState::kRightFree)));
  EXPECT_FALSE(none.allows(sequence(SubjectMode::kRightFree, TargetState::kRightPlatoon)));
  EXPECT_FALSE(none.allows(sequence(SubjectMode::kRightFree, TargetState::kLeftFree)));
  EXPECT_TRUE(ActionMask{}.allows(sequence(SubjectMode::kRightFree, TargetState::kLeftPlatoon)));
}

TEST(Ranking, ProgressBeforeCost) {
  PlanResult a, b;
  EXPECT_FALSE(ranks_before(a, b));
  a.feasible = true;
  EXPECT_TRUE(ranks_before(a, b));
  b.feasible = true;
  a.progress_shortfall = 0.0;
  b.progress_shortfall = 1.0;
  a.objective = 5.0;
  b.objective = 1.0;
  EXPECT_TRUE(ranks_before(a, b));
  b.progress_shortfall = 0.0;
  EXPECT_TRUE(ranks_before(b, a));
  EXPECT_FALSE(ranks_before(a, a));
}

TEST(Planner, OpenRoadHoldsLane) {
  const auto net = build_reference_network();
  auto planner = make_planner();
  const auto r = planner.select_plan(free_request(net, 14.0, 1000.0), ActionMask{false, false, false});
  ASSERT_TRUE(r.feasible);
  EXPECT_EQ(r.target, TargetState::kRightFree);
  for (SubAction a : r.sequence) EXPECT_EQ(a, SubAction::kWait);
  EXPECT_EQ(r.progress_shortfall, 0.0);
  const auto& traj = r.trajectory;
  EXPECT_NEAR(traj.t_end() - traj.t_start(), 10.0, 1e-9);
  for (double t = 0.0; t <= 10.0; t += 0.1) {
    const auto k = traj.eval(t);
    EXPECT_LE(k.vx, 20.0 + 1e-6);
    EXPECT_GE(k.vx, 14.0 - 1e-6);
    EXPECT_EQ(k.y, 0.0);
  }
}

TEST(Planner, MergeNeedsSomeoneToJoin) {
  const auto net = build_reference_network();
  auto planner = make_planner();
  const auto req = free_request(net, 14.0, 1000.0);
  EXPECT_FALSE(planner.optimize_sequence(sequence(SubjectMode::kRightFree, TargetState::kRightPlatoon), req).feasible);
  const auto r = planner.select_plan(req, ActionMask{true, true, false});
  ASSERT_TRUE(r.feasible);
  EXPECT_EQ(r.target, TargetState::kRightFree);
}

TEST(Planner, RespectsPredictedLeader) {
  const auto net = build_reference_network();
  auto planner = make_planner();
  auto req = free_request(net, 14.0, 1000.0);
  req.prediction.leader[lane_index(Lane::kRight)] =
      PredictedTrack{7, Lane::kRight, 0.0, 1000.0 + 5.0 + 60.0, 10.0, 5.0, false, {}};
  const auto r = planner.select_plan(req, ActionMask{false, false, false});
  ASSERT_TRUE(r.feasible);
  const auto& lead = *req.prediction.leader_in(Lane::kRight);
  for (double t = 0.0; t <= 10.0; t += 0.1) {
    const auto k = r.trajectory.eval(t);
    EXPECT_GE(lead.rear_at(t) - k.x, 3.5 * k.vx - 1e-6) << t;
  }
}

TEST(Planner, ReplanningIsDeterministic) {
  const auto net = build_reference_network();
  auto warm = make_planner();
  const auto req = free_request(net, 12.0, 500.0);
  const auto a = warm.select_plan(req);
  const auto b = warm.select_plan(req);  // shape cache now populated
  auto fresh = make_planner();
  const auto c = fresh.select_plan(req);
  for (const auto* r : {&b, &c}) {
    EXPECT_EQ(r->target, a.target);
    EXPECT_EQ(r->objective, a.objective);
    ASSERT_EQ(r->trajectory.segments().size(), a.trajectory.segments().size());
    EXPECT_EQ(r->trajectory.segments().back().end_state().x, a.trajectory.segments().back().end_state().x);
  }
}

TEST(PlannerProperty, FuelPriceScalesObjectiveNotChoice) {
  const auto net = build_reference_network();
  for_all(20, 41, [&](Gen& g) {
    const double v = g.uniform(0, 20);
    const double k = g.uniform(0.2, 5.0);
    auto req = free_request(net, v, g.uniform(0, 10000));
    if (g.coin()) {
      req.prediction.leader[lane_index(Lane::kRight)] =
          PredictedTrack{9, Lane::kRight, 0.0, req.start.x + g.uniform(60, 250), g.uniform(5, 20), 5.0, false, {}};
    }
    auto base = make_planner();
    auto scaled = make_planner(k);
    const ActionMask wait_only{false, false, false};
    const auto a = base.select_plan(req, wait_only);
    const auto b = scaled.select_plan(req, wait_only);
    ASSERT_EQ(a.feasible, b.feasible);
    if (!a.feasible) return;
    EXPECT_EQ(a.target, b.target);
    EXPECT_NEAR(b.objective, k * a.objective, 1e-9 * (1 + k * a.objective));
    EXPECT_NEAR(b.trajectory.segments().back().end_state().x, a.trajectory.segments().back().end_state().x, 1e-9);
  });
}

// --- controller ------------------------------------------------------------

TEST(Controllers, NamesRoundTrip) {
  for (ControllerKind k : kAllControllers) EXPECT_EQ(parse_controller(to_string(k)), k);
  EXPECT_FALSE(parse_controller("OC_M3").has_value());
}

TEST(Controllers, Flags) {
  EXPECT_FALSE(ControllerFlags::of(ControllerKind::kCF).optimal);
  EXPECT_FALSE(ControllerFlags::of(ControllerKind::kOC).platoon);
  EXPECT_FALSE(ControllerFlags::of(ControllerKind::kOC_M6).lane_change);
  EXPECT_TRUE(ControllerFlags::of(ControllerKind::kOC_L).lane_change);
  EXPECT_FALSE(ControllerFlags::of(ControllerKind::kOC_L).platoon);
  EXPECT_TRUE(ControllerFlags::of(ControllerKind::kOC_LM6).platoon);
}

TEST(Controllers, MinimumPlatoonKeep) {
  EXPECT_FALSE(enforce_min_keep(ControllerKind::kOC_M6, 5.9));
  EXPECT_TRUE(enforce_min_keep(ControllerKind::kOC_M6, 6.0));
  EXPECT_FALSE(enforce_min_keep(ControllerKind::kOC_LM6, 0.0));
  EXPECT_TRUE(enforce_min_keep(ControllerKind::kOC_M0, 0.0));
  EXPECT_TRUE(enforce_min_keep(ControllerKind::kOC_LM0, 0.0));
  EXPECT_FALSE(enforce_min_keep(ControllerKind::kOC, 100.0));
  EXPECT_TRUE(enforce_min_keep(ControllerKind::kOC_M6, 2.5, 2500.0));
  EXPECT_FALSE(enforce_min_keep(ControllerKind::kOC_M6, 2.4, 2500.0));
  EXPECT_EQ(ControllerFlags::of(ControllerKind::kOC_M0, 2500.0).min_keep_km, 0.0);
}

TEST(Controllers, RestrictionKeepsTheCurve) {
  const auto seg = solve_segment({0, 10, 1, 0, 0, 0}, {150, 14, -0.5, 0, 0, 0}, 10.0, 2.0, SubAction::kWait);
  const auto pieces = restrict_trajectory(Trajectory({seg}), 4.0, 4.8);
  ASSERT_EQ(pieces.size(), 1u);
  for (double t = 4.0; t <= 4.8; t += 0.05) {
    EXPECT_NEAR(pieces[0].eval(t).x, seg.eval(t).x, 1e-9);
    EXPECT_NEAR(pieces[0].eval(t).ax, seg.eval(t).ax, 1e-9);
  }
  EXPECT_TRUE(restrict_trajectory(Trajectory({seg}), 20.0, 21.0).empty());
}

class TripTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const ModelParams mp;
    auto net = std::make_shared<const RoadNetwork>(build_reference_network(mp));
    warm_ = std::make_unique<WarmupResult>(
        make_scenario_world(TrafficStateKind::kOnsetOfCongestion,
                            scenario_seed(ExperimentConfig{}.base_seed, TrafficStateKind::kOnsetOfCongestion, 0), net,
                            mp));
  }
  static void TearDownTestSuite() { warm_.reset(); }

  static RunResult trip(ControllerKind c) {
    RunOptions opt;
    opt.keep_trace = true;
    return run_scenario({c, TrafficStateKind::kOnsetOfCongestion, 0.0, 0}, *warm_, ModelParams{}, opt);
  }

  static bool subject_event(const RunResult& r, std::string_view kind) {
    return r.event_log.find(" " + std::string(kind) + " " + std::to_string(warm_->world.subject_id) + " ") !=
           std::string::npos;
  }

  static inline std::unique_ptr<WarmupResult> warm_;
};

TEST_F(TripTest, CarFollowingNeverPlans) {
  const auto r = trip(ControllerKind::kCF);
  ASSERT_TRUE(r.completed) << r.error;
  EXPECT_EQ(r.stats.replans, 0);
  EXPECT_EQ(r.event_log.find("PLAN"), std::string::npos);
  EXPECT_EQ(r.stats.lane_changes, 0);
}

TEST_F(TripTest, OptimalControlStaysInLaneAndAlone) {
  const auto r = trip(ControllerKind::kOC);
  ASSERT_TRUE(r.completed) << r.error;
  EXPECT_GT(r.stats.replans, 0);
  EXPECT_EQ(r.stats.lane_changes, 0);
  EXPECT_EQ(r.stats.merges, 0);
  EXPECT_EQ(r.stats.platoon_distance, 0.0);
  EXPECT_EQ(r.trajectory_csv.find(",L,"), std::string::npos);
  EXPECT_FALSE(subject_event(r, "SUBJECT_LANE_CHANGE"));
}

TEST_F(TripTest, PlatooningWithoutLaneChanges) {
  const auto r = trip(ControllerKind::kOC_M6);
  ASSERT_TRUE(r.completed) << r.error;
  EXPECT_EQ(r.stats.lane_changes, 0);
  EXPECT_EQ(r.trajectory_csv.find(",L,"), std::string::npos);
  EXPECT_EQ(r.gap_violations, 0);
  EXPECT_EQ(r.bound_violations, 0);
}

TEST_F(TripTest, SameInputsSameTrip) {
  const auto a = trip(ControllerKind::kOC);
  const auto b = trip(ControllerKind::kOC);
  EXPECT_EQ(a.trajectory_csv, b.trajectory_csv);
  EXPECT_EQ(a.event_log, b.event_log);
  EXPECT_EQ(a.subject.total(), b.subject.total());
}

}  // namespace
}  // namespace cavsim
