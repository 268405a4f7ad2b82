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

/// @file planner.hpp
/// @brief Grid-search optimal control over the sub-action sequences of each
///        target state.
///
/// For every sub-action the free variables are the end speed (a grid plus a
/// few anchor speeds) and the duration (whole seconds); end accelerations
/// are zero and the last segment fills the horizon. A free segment ends at
/// the position that keeps its velocity profile cubic. A merge segment ends
/// on a piece transition at the moment the downstream vehicle's tail spot
/// (gap t_g) passes it, at that vehicle's speed.
///
/// Candidates are ranked by the shortfall of their final speed below a
/// progress floor, then by fuel plus time cost per 10 km over the horizon.

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <unordered_map>
#include <vector>

#include "cavsim/cost_stats.hpp"
#include "cavsim/feasibility.hpp"
#include "cavsim/maneuver.hpp"
#include "cavsim/quintic.hpp"
#include "cavsim/road_network.hpp"
#include "cavsim/world.hpp"

namespace cavsim {

/// Fuel and time cost of one segment; trapezoidal quadrature at `dt`.
inline CostBreakdown segment_cost(const QuinticSegment& seg, double beta, const CostParams& c,
                                  double dt = 0.01) {
  const auto n = std::max<long>(1, static_cast<long>(std::ceil(seg.duration() / dt - 1e-9)));
  const double h = seg.duration() / static_cast<double>(n);
  double integral = 0.0;
  for (long i = 0; i <= n; ++i) {
    const double tau = static_cast<double>(i) * h;
    const double w = (i == 0 || i == n) ? 0.5 : 1.0;
    integral += w * traction_power(seg.vx_at(tau), seg.ax_at(tau), c);
  }
  CostBreakdown out;
  out.energy = beta * integral * h;
  out.fuel_dollars = c.eta_f * out.energy;
  out.time_dollars = c.eta_t * seg.duration();
  out.distance = seg.x_at(seg.duration()) - seg.x_at(0.0);
  return out;
}

struct PlannerSettings {
  double speed_step = 2.0;
  double sample_dt = 0.1;
  double quadrature_dt = 0.01;
  double min_segment = 1.0;  // shortest sub-action [s]
  double d_cg = 50.0;        // target-lane follower gap at lane-change start
  double comm_range = 300.0;
  std::array<double, 2> v_m{14.0, 20.0};  // capacity speed per lane
  std::size_t merge_points = 3;          // transitions considered per merge

  static PlannerSettings from(const ModelParams& p) {
    return {p.grid_speed_step, p.sample_dt,     p.quadrature_dt, 1.0,
            p.d_cg,            p.comm_range,    {p.v_m_right, p.v_m_left}, 3};
  }
};

/// Frozen inputs of one replan.
struct PlanRequest {
  BoundaryState start;
  double t_start = 0.0;
  SubjectMode mode = SubjectMode::kRightFree;
  bool platoon_follower = false;  // subject trails a platoon member
  LeaderPrediction prediction;
  const RoadNetwork* network = nullptr;
};

/// Sub-actions the controller currently permits.
struct ActionMask {
  bool merge = true;
  bool split = true;
  bool lane_change = true;

  [[nodiscard]] bool allows(const ManeuverPlan& plan) const {
    for (SubAction a : plan.sequence) {
      if ((a == SubAction::kMerge && !merge) || (a == SubAction::kSplit && !split) ||
          (a == SubAction::kLaneChange && !lane_change)) {
        return false;
      }
    }
    return true;
  }
};

struct PlanResult {
  bool feasible = false;
  TargetState target = TargetState::kRightFree;
  std::vector<SubAction> sequence;
  Trajectory trajectory;
  std::vector<double> betas;       // per segment
  GapPolicy gaps;                  // per-segment time gap used when checking
  CostBreakdown cost;              // over the horizon
  double objective = std::numeric_limits<double>::infinity();  // dollars per 10 km
  double progress_shortfall = std::numeric_limits<double>::infinity();
  VehicleId merge_target = kNoVehicle;
};

/// True when `a` ranks strictly before `b`.
inline bool ranks_before(const PlanResult& a, const PlanResult& b) {
  if (!a.feasible) return false;
  if (!b.feasible) return true;
  constexpr double kTol = 1e-9;
  if (a.progress_shortfall < b.progress_shortfall - kTol) return true;
  if (a.progress_shortfall > b.progress_shortfall + kTol) return false;
  return a.objective < b.objective * (1.0 - 1e-12);
}

class Planner {
 public:
  Planner(PlanLimits limits, CostParams cost, PlannerSettings settings)
      : limits_(limits), cost_(cost), settings_(settings) {}

  [[nodiscard]] const PlanLimits& limits() const { return limits_; }
  [[nodiscard]] const CostParams& cost_params() const { return cost_; }
  [[nodiscard]] const PlannerSettings& settings() const { return settings_; }

  /// Best feasible candidate for one sub-action sequence.
  PlanResult optimize_sequence(const ManeuverPlan& plan, const PlanRequest& req) {
    Search s{plan, req, req.t_start + limits_.horizon, {}, {}, {}, {}, {}, kNoVehicle, {}};
    s.speeds = candidate_speeds(req);
    s.best.target = plan.target;
    s.best.sequence = plan.sequence;
    dfs(s, 0, req.start, req.t_start, in_platoon(req.mode), req.platoon_follower);
    return s.best;
  }

  /// Evaluates all permitted targets and returns the best. Ties go to the
  /// target that keeps the current state, then to fewer sub-actions.
  PlanResult select_plan(const PlanRequest& req, const ActionMask& mask = {}) {
    PlanResult best;
    const TargetState hold = hold_target(req.mode);
    for (TargetState target : targets(req.mode)) {
      const ManeuverPlan plan = sequence(req.mode, target);
      if (!mask.allows(plan)) continue;
      PlanResult r = optimize_sequence(plan, req);
      if (!r.feasible) continue;
      if (!best.feasible || ranks_before(r, best)) {
        best = std::move(r);
        continue;
      }
      if (ranks_before(best, r)) continue;
      // Tie.
      const bool r_hold = r.target == hold, b_hold = best.target == hold;
      if ((r_hold && !b_hold) || (r_hold == b_hold && r.sequence.size() < best.sequence.size())) {
        best = std::move(r);
      }
    }
    if (!best.feasible) best.target = hold;
    return best;
  }

 private:
  struct Search {
    const ManeuverPlan& plan;
    const PlanRequest& req;
    double t_end;
    std::vector<double> speeds;
    std::vector<QuinticSegment> segs;
    std::vector<double> betas;
    std::vector<double> gaps;
    std::vector<double> energies;
    VehicleId merge_target = kNoVehicle;
    PlanResult best;
  };

  struct ShapeKey {
    std::uint64_t v0, a0, v1, T;
    int dy;
    int lane;
    bool operator==(const ShapeKey&) const = default;
  };
  struct ShapeHash {
    std::size_t operator()(const ShapeKey& k) const {
      std::uint64_t h = 1469598103934665603ull;
      for (std::uint64_t w : {k.v0, k.a0, k.v1, k.T, static_cast<std::uint64_t>(k.dy + 2),
                              static_cast<std::uint64_t>(k.lane)}) {
        h ^= w + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
      }
      return static_cast<std::size_t>(h);
    }
  };
  struct ShapeInfo {
    bool ok = false;
    double energy = 0.0;  // unweighted traction energy [J]
  };

  /// Speed, acceleration and jerk limits plus traction energy depend only on
  /// the segment's shape, not on where it starts.
  const ShapeInfo& shape(const QuinticSegment& seg, const BoundaryState& s, double v1, double T,
                         int dy) {
    const ShapeKey key{std::bit_cast<std::uint64_t>(s.vx), std::bit_cast<std::uint64_t>(s.ax),
                       std::bit_cast<std::uint64_t>(v1), std::bit_cast<std::uint64_t>(T), dy,
                       static_cast<int>(lane_at(s.y, limits_.lane_width))};
    if (auto it = shapes_.find(key); it != shapes_.end()) return it->second;
    if (shapes_.size() > 200000) shapes_.clear();
    ShapeInfo info;
    info.ok = check_segment(seg, limits_, kNoNeighbours, settings_.sample_dt, 0.0, 0.0).feasible;
    if (info.ok) info.energy = segment_cost(seg, 1.0, unit_cost(), settings_.quadrature_dt).energy;
    return shapes_.emplace(key, info).first->second;
  }

  [[nodiscard]] CostParams unit_cost() const {
    CostParams c = cost_;
    c.eta_f = 1.0;
    c.eta_t = 0.0;
    return c;
  }

  [[nodiscard]] std::vector<double> candidate_speeds(const PlanRequest& req) const {
    std::vector<double> v;
    const double top = std::max(limits_.v_max_left, limits_.v_max_right);
    for (double s = 0.0; s <= top + 1e-9; s += settings_.speed_step) v.push_back(s);
    v.push_back(req.start.vx);
    for (Lane l : {Lane::kRight, Lane::kLeft}) {
      v.push_back(settings_.v_m[lane_index(l)]);
      v.push_back(limits_.v_max(l));
      if (const auto& t = req.prediction.leader_in(l)) v.push_back(t->v0);
    }
    std::erase_if(v, [top](double s) { return s < 0.0 || s > top + 1e-9; });
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end(), [](double a, double b) { return std::abs(a - b) < 1e-9; }),
            v.end());
    return v;
  }

  [[nodiscard]] double lane_center(Lane l) const {
    return l == Lane::kLeft ? limits_.lane_width : 0.0;
  }

  [[nodiscard]] double beta_for(SubAction a, bool member) const {
    switch (a) {
      case SubAction::kWait: return member ? cost_.beta_platoon : cost_.beta_free;
      case SubAction::kMerge:
      case SubAction::kSplit: return cost_.beta_transition;
      case SubAction::kLaneChange: return cost_.beta_free;
    }
    return cost_.beta_free;
  }

  [[nodiscard]] double progress_floor(const PlanRequest& req, Lane lane) const {
    double floor = settings_.v_m[lane_index(lane)];
    if (const auto& l = req.prediction.leader_in(lane)) {
      if (l->x0 - req.start.x <= settings_.comm_range) floor = std::min(floor, l->v0);
    }
    return floor;
  }

  void finalize(Search& s) {
    const PlanRequest& req = s.req;
    double energy = 0.0;
    for (std::size_t i = 0; i < s.segs.size(); ++i) energy += s.betas[i] * s.energies[i];
    const auto& last = s.segs.back();
    const auto end = last.end_state();
    CostBreakdown cost;
    cost.energy = energy;
    cost.fuel_dollars = cost_.eta_f * energy;
    cost.time_dollars = cost_.eta_t * (s.t_end - req.t_start);
    cost.distance = end.x - req.start.x;
    PlanResult cand;
    cand.feasible = true;
    cand.progress_shortfall =
        std::max(0.0, progress_floor(req, lane_at(end.y, limits_.lane_width)) - end.vx);
    cand.objective = cost.total() * 10000.0 / std::max(cost.distance, 1e-3);
    if (s.best.feasible && !ranks_before(cand, s.best)) return;
    cand.cost = cost;
    cand.target = s.plan.target;
    cand.sequence = s.plan.sequence;
    cand.trajectory = Trajectory(s.segs);
    cand.betas = s.betas;
    cand.gaps.time_gap = s.gaps;
    cand.gaps.follower_time_gap = limits_.t_g;
    cand.merge_target = s.merge_target;
    s.best = std::move(cand);
  }

  void push(Search& s, const QuinticSegment& seg, double beta, double gap, double energy) {
    s.segs.push_back(seg);
    s.betas.push_back(beta);
    s.gaps.push_back(gap);
    s.energies.push_back(energy);
  }
  void pop(Search& s) {
    s.segs.pop_back();
    s.betas.pop_back();
    s.gaps.pop_back();
    s.energies.pop_back();
  }

  void dfs(Search& s, std::size_t k, const BoundaryState& st, double t, bool member, bool follower) {
    const auto& seq = s.plan.sequence;
    const SubAction action = seq[k];
    const bool last = k + 1 == seq.size();
    const double rest = static_cast<double>(seq.size() - k - 1) * settings_.min_segment;
    const Lane lane = lane_at(st.y, limits_.lane_width);

    if (action == SubAction::kMerge) {
      merge_options(s, k, st, t, lane, rest);
      return;
    }

    const double gap = action == SubAction::kWait ? (member && follower ? limits_.t_g : limits_.t_p)
                       : action == SubAction::kSplit ? limits_.t_g
                                                     : limits_.t_p;
    const bool next_member = action == SubAction::kSplit ? false : member;
    const bool next_follower = action == SubAction::kSplit ? false : follower;
    const double beta = beta_for(action, member);
    const int dy = action == SubAction::kLaneChange ? (lane == Lane::kRight ? 1 : -1) : 0;
    const double y1 = action == SubAction::kLaneChange ? lane_center(other_lane(lane)) : st.y;

    if (action == SubAction::kLaneChange && !lane_change_admissible(s.req, st, t, other_lane(lane))) {
      return;
    }

    std::vector<double> durations;
    if (last) {
      const double T = s.t_end - t;
      if (T >= settings_.min_segment - 1e-9) durations.push_back(T);
    } else {
      for (double T = settings_.min_segment; T <= s.t_end - t - rest + 1e-9; T += 1.0) durations.push_back(T);
    }

    for (double T : durations) {
      for (double v1 : s.speeds) {
        if (std::abs(v1 - st.vx) > limits_.a_max * T + 1e-9) continue;
        const BoundaryState end{st.x + T * (st.vx + v1) / 2.0 + st.ax * T * T / 12.0, v1, 0.0, y1, 0.0, 0.0};
        const QuinticSegment seg = solve_segment(st, end, T, t, action);
        const ShapeInfo& info = shape(seg, st, v1, T, dy);
        if (!info.ok) continue;
        if (!check_segment(seg, limits_, s.req.prediction, settings_.sample_dt, gap, limits_.t_g)) continue;
        if (action == SubAction::kSplit && !split_complete(s.req, end, t + T)) continue;
        push(s, seg, beta, gap, info.energy);
        if (last) {
          finalize(s);
        } else {
          dfs(s, k + 1, end, t + T, next_member, next_follower);
        }
        pop(s);
      }
    }
  }

  /// The target-lane follower must be far enough back and not inside a platoon.
  bool lane_change_admissible(const PlanRequest& req, const BoundaryState& st, double t, Lane target) const {
    if (const auto& f = req.prediction.follower_in(target)) {
      if (f->membership.kind == MembershipKind::kFollower) return false;
      if (st.x - limits_.subject_length - f->x_at(t) < settings_.d_cg) return false;
    }
    return true;
  }

  bool split_complete(const PlanRequest& req, const BoundaryState& end, double t_end) const {
    const auto& l = req.prediction.leader_in(lane_at(end.y, limits_.lane_width));
    if (!l) return true;
    return l->rear_at(t_end) - end.x >= limits_.t_p * end.vx - limits_.eps;
  }

  void merge_options(Search& s, std::size_t k, const BoundaryState& st, double t, Lane lane, double rest) {
    const auto& leader = s.req.prediction.leader_in(lane);
    if (!leader || s.req.network == nullptr) return;
    const auto& m = leader->membership;
    if (!leader->platoon_enabled || m.dissolving || m.kind == MembershipKind::kDissolving) return;
    const double vL = leader->v0;
    if (!(vL > 0.1) || vL > limits_.v_max(lane) + 1e-9) return;
    std::size_t tried = 0;
    for (double X : s.req.network->transitions()) {
      if (X <= st.x) continue;
      if (tried++ >= settings_.merge_points) break;
      // Time at which the platoon-gap spot behind the leader passes X.
      const double t_end = leader->t0 + (X + leader->length + limits_.t_g * vL - leader->x0) / vL;
      const double T = t_end - t;
      if (T < settings_.min_segment - 1e-9 || t_end > s.t_end - rest + 1e-9) continue;
      const BoundaryState end{X, vL, 0.0, st.y, 0.0, 0.0};
      const QuinticSegment seg = solve_segment(st, end, T, t, SubAction::kMerge);
      if (!check_segment(seg, limits_, s.req.prediction, settings_.sample_dt, limits_.t_g, limits_.t_g)) continue;
      const double energy = segment_cost(seg, 1.0, unit_cost(), settings_.quadrature_dt).energy;
      push(s, seg, cost_.beta_transition, limits_.t_g, energy);
      const VehicleId saved = s.merge_target;
      s.merge_target = leader->id;
      dfs(s, k + 1, end, t_end, true, true);
      s.merge_target = saved;
      pop(s);
    }
  }

  static inline const LeaderPrediction kNoNeighbours{};

  PlanLimits limits_;
  CostParams cost_;
  PlannerSettings settings_;
  std::unordered_map<ShapeKey, ShapeInfo, ShapeHash> shapes_;
};

}  // namespace cavsim
