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

/// @file controller.hpp
/// @brief Subject-vehicle controllers and the replanning cycle.
///
/// At clock t the subject executes the window [t, t + t_upd] committed one
/// cycle earlier while the planner works on the trajectory that starts at
/// t + t_upd. Merge, split and lane-change segments are locked once
/// execution enters them; replanning then continues after the locked
/// segment. When no candidate is feasible the subject follows IDM for one
/// window.

#pragma once

#include <array>
#include <chrono>
#include <optional>
#include <string_view>
#include <vector>

#include "cavsim/cost_stats.hpp"
#include "cavsim/feasibility.hpp"
#include "cavsim/maneuver.hpp"
#include "cavsim/planner.hpp"
#include "cavsim/quintic.hpp"
#include "cavsim/traffic.hpp"
#include "cavsim/world.hpp"

namespace cavsim {

enum class ControllerKind : std::uint8_t { kCF, kOC, kOC_M0, kOC_M6, kOC_L, kOC_LM0, kOC_LM6 };

inline constexpr std::array<ControllerKind, 7> kAllControllers{
    ControllerKind::kCF,   ControllerKind::kOC,    ControllerKind::kOC_M0, ControllerKind::kOC_M6,
    ControllerKind::kOC_L, ControllerKind::kOC_LM0, ControllerKind::kOC_LM6};

constexpr std::string_view to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::kCF: return "CF";
    case ControllerKind::kOC: return "OC";
    case ControllerKind::kOC_M0: return "OC_M0";
    case ControllerKind::kOC_M6: return "OC_M6";
    case ControllerKind::kOC_L: return "OC_L";
    case ControllerKind::kOC_LM0: return "OC_LM0";
    case ControllerKind::kOC_LM6: return "OC_LM6";
  }
  return "?";
}

inline std::optional<ControllerKind> parse_controller(std::string_view s) {
  for (ControllerKind k : kAllControllers) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

struct ControllerFlags {
  bool optimal = false;
  bool platoon = false;
  bool lane_change = false;
  std::optional<double> min_keep_km;  // none when platooning is off

  /// `keep_m` is the distance the M6 variants stay in a platoon [m].
  static ControllerFlags of(ControllerKind k, double keep_m = 6000.0) {
    switch (k) {
      case ControllerKind::kCF: return {false, false, false, std::nullopt};
      case ControllerKind::kOC: return {true, false, false, std::nullopt};
      case ControllerKind::kOC_M0: return {true, true, false, 0.0};
      case ControllerKind::kOC_M6: return {true, true, false, keep_m / 1000.0};
      case ControllerKind::kOC_L: return {true, false, true, std::nullopt};
      case ControllerKind::kOC_LM0: return {true, true, true, 0.0};
      case ControllerKind::kOC_LM6: return {true, true, true, keep_m / 1000.0};
    }
    return {};
  }
};

/// Whether the subject may split after `distance_in_platoon_km` in a platoon.
inline bool enforce_min_keep(ControllerKind kind, double distance_in_platoon_km, double keep_m = 6000.0) {
  const auto flags = ControllerFlags::of(kind, keep_m);
  if (!flags.min_keep_km) return false;
  return distance_in_platoon_km + 1e-9 >= *flags.min_keep_km;
}

/// Restriction of a trajectory to [t0, t1], one piece per overlapped segment.
inline std::vector<QuinticSegment> restrict_trajectory(const Trajectory& traj, double t0, double t1) {
  std::vector<QuinticSegment> out;
  for (const auto& seg : traj.segments()) {
    const double a = std::max(t0, seg.t_start());
    const double b = std::min(t1, seg.t_end());
    if (b - a <= 1e-9) continue;
    out.push_back(solve_segment(seg.eval(a).boundary(), seg.eval(b).boundary(), b - a, a, seg.sub_action()));
  }
  return out;
}

/// IDM acceleration of the subject against its current-lane leader.
inline double idm_fallback(const WorldState& world, const BehaviorParams& bp) {
  const auto& s = world.get(world.subject_id);
  IdmParams p = detail::idm_for(s, bp, *world.network);
  if (s.membership.dissolving) p.T = bp.t_p;
  double gap = std::numeric_limits<double>::infinity();
  double closing = 0.0;
  if (auto l = leader_of(world, s.id, s.lane)) {
    gap = bumper_gap(*l, s);
    closing = s.v - l->v;
  }
  return idm_accel(s.v, gap, closing, p, bp.tau_s);
}

/// One executed window of the subject, kept for auditing.
struct ExecutedWindow {
  std::vector<QuinticSegment> pieces;
  std::vector<double> time_gaps;  // per piece
  LeaderPrediction prediction;    // information available at execution
  bool fallback = false;
};

struct ControllerStats {
  std::vector<double> replan_seconds;
  int replans = 0;
  int fallbacks = 0;
  int merges = 0;
  int splits = 0;
  int lane_changes = 0;
  double platoon_distance = 0.0;
};

class SubjectController {
 public:
  SubjectController(ControllerKind kind, const ModelParams& mp, double vot_per_hour)
      : kind_(kind), flags_(ControllerFlags::of(kind, mp.min_platoon_keep)), mp_(mp), bp_(BehaviorParams::from(mp)),
        limits_(PlanLimits::from(mp)),
        planner_(limits_, CostParams::from(mp, vot_per_hour), PlannerSettings::from(mp)) {}

  [[nodiscard]] ControllerKind kind() const { return kind_; }
  [[nodiscard]] const ControllerStats& stats() const { return stats_; }
  [[nodiscard]] const std::vector<ExecutedWindow>& executed() const { return executed_; }
  void keep_executed(bool on) { keep_executed_ = on; }

  /// Prepares the subject for this controller; call once after warm-up.
  void attach(WorldState& world) {
    auto* s = world.find(world.subject_id);
    s->platoon_enabled = flags_.platoon;
    s->membership = PlatoonMembership::free();
  }

  /// Traffic-model view of the subject for the coming step.
  SubjectHooks hooks(WorldState& world) {
    SubjectHooks h;
    h.idm_driven = !flags_.optimal;
    const auto& s = world.get(world.subject_id);
    h.accepts_merge = flags_.platoon && !locked_ && !passive(world, s);
    h.hold_dissolution = flags_.min_keep_km.has_value() &&
                         !enforce_min_keep(kind_, stats_.platoon_distance / 1000.0, mp_.min_platoon_keep);
    if (flags_.optimal) {
      h.advance = [this](VehicleState& v) { apply_window_end(v); };
    }
    return h;
  }

  /// Current state of the subject in the six-state machine.
  [[nodiscard]] SubjectMode mode(const WorldState& world) const {
    const auto& s = world.get(world.subject_id);
    if (!s.membership.is_member()) return free_mode(s.lane);
    return passive(world, s) ? passive_mode(s.lane) : active_mode(s.lane);
  }

  /// Speed-weighted platoon coefficient of the window being executed.
  [[nodiscard]] double current_beta(const WorldState& world) const {
    if (maneuver_ == SubAction::kMerge || maneuver_ == SubAction::kSplit) return mp_.beta_transition;
    const auto& m = world.get(world.subject_id).membership;
    if (m.kind == MembershipKind::kDissolving || (m.is_member() && m.dissolving)) return mp_.beta_transition;
    return m.is_member() ? mp_.beta_platoon : mp_.beta_free;
  }

  /// Runs one replanning cycle at the current clock. Must be called before
  /// the traffic step of the same epoch.
  void cycle(WorldState& world) {
    if (!flags_.optimal) return;
    const double t = world.clock();
    const double tau = mp_.t_upd;
    const VehicleId id = world.subject_id;
    auto& s = *world.find(id);

    finish_maneuvers(world, s, t);
    const LeaderPrediction now = predict_leaders(world, limits_.horizon + 2.0 * tau);

    // Window to execute in [t, t + tau].
    std::vector<QuinticSegment> window;
    std::vector<double> window_gaps;
    bool fallback = committed_.empty() || committed_.t_end() < t + tau - 1e-9 ||
                    committed_.t_start() > t + 1e-9;
    if (!fallback) {
      window = restrict_trajectory(committed_, t, t + tau);
      for (const auto& piece : window) window_gaps.push_back(gap_at(piece.t_start()));
      for (std::size_t i = 0; i < window.size() && !fallback; ++i) {
        if (!check_segment(window[i], limits_, now, mp_.sample_dt, window_gaps[i], limits_.t_g)) {
          fallback = true;
          abort_maneuver(world, s);
        }
      }
    }
    if (!fallback) enter_maneuvers(world, s, window);
    if (fallback) {
      const auto& subj = world.get(id);
      window = {fallback_segment(world, subj, t, tau)};
      window_gaps = {0.0};
      if (stats_.replans > 0) {
        ++stats_.fallbacks;
        world.log(EventKind::kFallback, subj);
      }
      committed_ = Trajectory();
    }
    window_ = Trajectory(window);
    if (keep_executed_) executed_.push_back({window, window_gaps, now, fallback});

    plan_ahead(world, id, t + tau, now);
  }

 private:
  [[nodiscard]] bool passive(const WorldState& world, const VehicleState& s) const {
    if (!s.membership.is_member() || !s.membership.dissolving) return false;
    if (s.membership.kind == MembershipKind::kLeader) return true;
    auto f = follower_of(world, s.id, s.lane);
    return !f || f->membership.kind != MembershipKind::kFollower || f->membership.leader_id != s.membership.leader_id;
  }

  [[nodiscard]] double lane_center(Lane l) const { return l == Lane::kLeft ? limits_.lane_width : 0.0; }

  [[nodiscard]] double gap_at(double t) const {
    const auto& segs = committed_.segments();
    for (std::size_t i = 0; i < segs.size(); ++i) {
      if (t >= segs[i].t_start() - 1e-9 && t < segs[i].t_end() - 1e-9) {
        return i < committed_gaps_.size() ? committed_gaps_[i] : limits_.t_p;
      }
    }
    return limits_.t_p;
  }

  /// Constant-acceleration IDM window; lateral motion of an interrupted lane
  /// change continues as planned.
  QuinticSegment fallback_segment(const WorldState& world, const VehicleState& s, double t, double tau) {
    const double acc = idm_fallback(world, bp_);
    BoundaryState start{s.x, s.v, 0.0, lane_center(s.lane), 0.0, 0.0};
    const QuinticSegment x = ballistic_segment(start, acc, tau, t, SubAction::kWait);
    if (lateral_ && lateral_->t_end() > t + 1e-9) {
      const double b = std::min(lateral_->t_end(), t + tau);
      const auto y0 = lateral_->eval(std::max(t, lateral_->t_start()));
      const auto y1 = lateral_->eval(b);
      NormalizedQuintic yq = NormalizedQuintic::fit(y0.y, y0.vy, y0.ay, y1.y, y1.vy, y1.ay, tau);
      if (b < t + tau - 1e-9) yq = NormalizedQuintic::fit(y0.y, y0.vy, y0.ay, y1.y, 0.0, 0.0, tau);
      return QuinticSegment(x.x_poly(), yq, t, tau, SubAction::kWait);
    }
    return x;
  }

  /// Moves the subject to the end of the executed window.
  void apply_window_end(VehicleState& v) {
    const auto k = window_.eval(window_.t_end());
    v.x = k.x;
    v.v = std::max(0.0, k.vx);
    v.a = k.ax;
    v.lateral = lateral_ && lateral_->t_end() > window_.t_end() - 1e-9 ? std::abs(k.y - lateral_origin_) : 0.0;
    if (v.membership.is_member()) stats_.platoon_distance += v.x - v.x_prev;
  }

  /// Locks maneuvers the window enters and applies their start effects.
  void enter_maneuvers(WorldState& world, VehicleState& s, const std::vector<QuinticSegment>& window) {
    for (const auto& piece : window) {
      const SubAction a = piece.sub_action();
      if (a == SubAction::kWait || locked_) continue;
      const QuinticSegment* full = nullptr;
      for (const auto& seg : committed_.segments()) {
        if (piece.t_start() >= seg.t_start() - 1e-9 && piece.t_start() < seg.t_end() - 1e-9) full = &seg;
      }
      if (full == nullptr) continue;
      locked_ = *full;
      maneuver_ = a;
      locked_merge_target_ = committed_merge_target_;
      if (a == SubAction::kLaneChange) {
        lateral_ = *full;
        lateral_origin_ = lane_center(s.lane);
        VehicleState moved = s;
        auto& from = world.lane(s.lane);
        std::erase_if(from, [&](const VehicleState& v) { return v.id == moved.id; });
        normalize_platoons(from);
        moved.lane = other_lane(moved.lane);
        moved.last_lane_change_time = world.clock();
        world.insert(moved);
        world.log(EventKind::kSubjectLaneChange, moved);
        ++stats_.lane_changes;
        return;  // `s` is no longer valid
      }
    }
  }

  void finish_maneuvers(WorldState& world, VehicleState& s, double t) {
    if (lateral_ && lateral_->t_end() <= t + 1e-9) lateral_.reset();
    if (!locked_ || locked_->t_end() > t + 1e-9) return;
    if (maneuver_ == SubAction::kMerge) complete_merge(world, s);
    if (maneuver_ == SubAction::kSplit) complete_split(world, s);
    locked_.reset();
    maneuver_ = SubAction::kWait;
  }

  void complete_merge(WorldState& world, VehicleState& s) {
    auto& lane = world.lane(s.lane);
    auto it = std::find_if(lane.begin(), lane.end(), [&](const VehicleState& v) { return v.id == s.id; });
    if (it == lane.begin()) return;
    auto& down = *std::prev(it);
    const auto& dm = down.membership;
    if (down.id != locked_merge_target_ || !down.platoon_enabled || dm.dissolving ||
        dm.kind == MembershipKind::kDissolving) {
      return;
    }
    VehicleId head;
    int countdown;
    if (dm.kind == MembershipKind::kFree) {
      countdown = schedule_split(s.lane, bp_, world.rng);
      down.membership = PlatoonMembership::leader(countdown);
      head = down.id;
    } else {
      head = dm.kind == MembershipKind::kLeader ? down.id : dm.leader_id;
      countdown = dm.split_countdown;
    }
    const VehicleId old_head = s.id;
    const bool was_leader = s.membership.kind == MembershipKind::kLeader;
    it->membership = PlatoonMembership::follower(head, countdown);
    if (was_leader) {
      for (auto j = std::next(it); j != lane.end(); ++j) {
        if (j->membership.kind != MembershipKind::kFollower || j->membership.leader_id != old_head) break;
        j->membership.leader_id = head;
        j->membership.split_countdown = countdown;
      }
    }
    world.log(EventKind::kSubjectMerge, *it, down.id, 0.0, countdown);
    ++stats_.merges;
  }

  void complete_split(WorldState& world, VehicleState& s) {
    if (!s.membership.is_member()) return;
    const Lane l = s.lane;
    const VehicleId id = s.id;
    s.membership = PlatoonMembership::free();
    normalize_platoons(world.lane(l));
    world.log(EventKind::kSubjectSplit, world.get(id));
    ++stats_.splits;
  }

  void abort_maneuver(WorldState&, VehicleState&) {
    locked_.reset();
    maneuver_ = SubAction::kWait;
  }

  [[nodiscard]] ActionMask mask(const WorldState& world) const {
    ActionMask m;
    m.merge = flags_.platoon;
    m.lane_change = flags_.lane_change;
    const auto& s = world.get(world.subject_id);
    m.split = !s.membership.is_member() ||
              enforce_min_keep(kind_, stats_.platoon_distance / 1000.0, mp_.min_platoon_keep);
    return m;
  }

  void plan_ahead(WorldState& world, VehicleId id, double t_plan, const LeaderPrediction& now) {
    const auto& s = world.get(id);
    const auto t0 = std::chrono::steady_clock::now();

    // A passive subject that already opened its gap is free again.
    if (passive(world, s) && !locked_) {
      if (auto l = leader_of(world, s.id, s.lane); !l || bumper_gap(*l, s) >= limits_.t_p * s.v) {
        complete_split(world, *world.find(s.id));
      }
    }
    const auto& subj = world.get(id);

    PlanRequest req;
    req.prediction = now;
    req.network = world.network.get();
    SubjectMode m = mode(world);
    req.platoon_follower = subj.membership.kind == MembershipKind::kFollower;

    std::vector<QuinticSegment> prefix;
    std::vector<double> prefix_gaps;
    prefix.assign(window_.segments().begin(), window_.segments().end());
    for (std::size_t i = 0; i < prefix.size(); ++i) prefix_gaps.push_back(executed_gap(i));
    double t_start = t_plan;
    BoundaryState start = window_.eval(t_plan).boundary();

    // An interrupted lane change finishes laterally under car following.
    if (lateral_ && !locked_) {
      committed_ = Trajectory(prefix);
      committed_gaps_ = prefix_gaps;
      record_time(t0);
      return;
    }

    if (locked_) {
      if (locked_->t_end() > t_plan + 1e-9) {
        auto rest = restrict_trajectory(Trajectory({*locked_}), t_plan, locked_->t_end());
        const double g = maneuver_gap();
        bool ok = true;
        for (const auto& piece : rest) ok = ok && check_segment(piece, limits_, now, mp_.sample_dt, g, limits_.t_g);
        if (!ok) {
          abort_maneuver(world, *world.find(id));
          committed_ = Trajectory(prefix);
          committed_gaps_ = prefix_gaps;
          record_time(t0);
          return;
        }
        for (const auto& piece : rest) {
          prefix.push_back(piece);
          prefix_gaps.push_back(g);
        }
        start = locked_->end_state();
        t_start = locked_->t_end();
      }
      // The world already holds the subject in its new lane.
      if (maneuver_ == SubAction::kMerge) {
        m = active_mode(lane_of(m));
        req.platoon_follower = true;
      }
      if (maneuver_ == SubAction::kSplit) {
        m = free_mode(lane_of(m));
        req.platoon_follower = false;
      }
    }
    // After a fallback the start acceleration may exceed the planner's bound;
    // the jump is allowed there.
    start.ax = std::clamp(start.ax, -limits_.a_max, limits_.a_max);
    req.start = start;
    req.t_start = t_start;
    req.mode = m;
    ActionMask am = mask(world);
    if (locked_) am.split = am.split && maneuver_ != SubAction::kMerge;

    PlanResult r = planner_.select_plan(req, am);
    ++stats_.replans;
    world.event_log.add(Event{world.clock(), EventKind::kPlan, subj.id, kNoVehicle, subj.lane, subj.x,
                              r.feasible ? r.objective : 0.0,
                              r.feasible ? static_cast<int>(r.target) : -1});
    if (!r.feasible) {
      committed_ = Trajectory(prefix);
      committed_gaps_ = prefix_gaps;
      record_time(t0);
      return;
    }
    // Splice: the new plan's start acceleration may differ from the window
    // end only after a fallback.
    std::vector<QuinticSegment> all = prefix;
    std::vector<double> gaps = prefix_gaps;
    for (std::size_t i = 0; i < r.trajectory.segments().size(); ++i) {
      all.push_back(r.trajectory.segments()[i]);
      gaps.push_back(i < r.gaps.time_gap.size() ? r.gaps.time_gap[i] : limits_.t_p);
    }
    committed_ = Trajectory(all);
    committed_gaps_ = gaps;
    committed_merge_target_ = r.merge_target;
    record_time(t0);
  }

  [[nodiscard]] double executed_gap(std::size_t i) const {
    if (executed_.empty()) return limits_.t_p;
    const auto& g = executed_.back().time_gaps;
    return i < g.size() ? g[i] : limits_.t_p;
  }

  [[nodiscard]] double maneuver_gap() const {
    switch (maneuver_) {
      case SubAction::kMerge:
      case SubAction::kSplit: return limits_.t_g;
      default: return limits_.t_p;
    }
  }

  void record_time(std::chrono::steady_clock::time_point t0) {
    stats_.replan_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }

  ControllerKind kind_;
  ControllerFlags flags_;
  ModelParams mp_;
  BehaviorParams bp_;
  PlanLimits limits_;
  Planner planner_;

  Trajectory committed_;
  std::vector<double> committed_gaps_;
  VehicleId committed_merge_target_ = kNoVehicle;
  Trajectory window_;
  std::optional<QuinticSegment> locked_;
  SubAction maneuver_ = SubAction::kWait;
  VehicleId locked_merge_target_ = kNoVehicle;
  std::optional<QuinticSegment> lateral_;
  double lateral_origin_ = 0.0;

  ControllerStats stats_;
  std::vector<ExecutedWindow> executed_;
  bool keep_executed_ = true;
};

}  // namespace cavsim
