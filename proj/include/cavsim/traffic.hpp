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

/// @file traffic.hpp
/// @brief Surrounding traffic: ramp entry/exit, platoon merge/split at piece
///        transitions with tail-first dissolution, random lane changing and
///        IDM car following; plus Greenberg-based warm-up.
///
/// One update step runs, in order: join/exit, merge/split, lane change and
/// velocity adjustment. Accelerations are computed from the positions the
/// previous step produced, so every vehicle reacts with a delay of one step.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cavsim/parameters.hpp"
#include "cavsim/road_network.hpp"
#include "cavsim/world.hpp"

namespace cavsim {

/// A broken physical invariant (overlap, NaN). Always fatal for the run.
class SimulationIntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct IdmParams {
  double a = 2.0;      // max desired acceleration
  double b = 3.0;      // comfortable deceleration
  double v0 = 20.0;    // desired speed
  double s0 = 5.0;     // standstill gap
  double T = 3.5;      // desired time gap
  double delta = 4.0;  // acceleration exponent
};

struct BehaviorParams {
  double p_on = 0.6;
  double p_off = 0.6;
  double p_npe = 0.5;
  double p_merge = 0.6;
  double p_change = 0.1;
  double t_lc = 5.0;
  double t_lcp = 3.6;
  double d_cg = 50.0;
  double tau_s = 0.4;
  double t_p = 3.5;
  double t_g = 0.55;
  double mu_sch_left = 2.0, sigma_sch_left = 5.0;
  double mu_sch_right = -1.0, sigma_sch_right = 5.0;
  std::array<int, 3> schedule_levels{2, 10, 50};
  double lane_width = 3.6;
  double l_car = 5.0;
  IdmParams idm;  // v0 and T are overridden per vehicle

  static BehaviorParams from(const ModelParams& p) {
    BehaviorParams b;
    b.p_on = p.p_on;
    b.p_off = p.p_off;
    b.p_npe = p.p_npe;
    b.p_merge = p.p_merge;
    b.p_change = p.p_change;
    b.t_lc = p.t_lc;
    b.t_lcp = p.t_lcp;
    b.d_cg = p.d_cg;
    b.tau_s = p.tau_s;
    b.t_p = p.t_p;
    b.t_g = p.t_g;
    b.mu_sch_left = p.mu_sch_left;
    b.sigma_sch_left = p.sigma_sch_left;
    b.mu_sch_right = p.mu_sch_right;
    b.sigma_sch_right = p.sigma_sch_right;
    b.schedule_levels = p.schedule_levels;
    b.lane_width = p.lane_width;
    b.l_car = p.l_car;
    b.idm = IdmParams{p.idm_a, p.idm_b, p.v_max_right, p.h_st, p.t_p, p.idm_delta};
    return b;
  }
};

enum class TrafficStateKind : std::uint8_t { kFreeFlow, kOnsetOfCongestion, kCongested };

inline const char* to_string(TrafficStateKind k) {
  switch (k) {
    case TrafficStateKind::kFreeFlow: return "free";
    case TrafficStateKind::kOnsetOfCongestion: return "onset";
    case TrafficStateKind::kCongested: return "congested";
  }
  return "?";
}

/// Maximum density of each traffic state as a multiple of the capacity density.
inline double density_cutoff_factor(TrafficStateKind k) {
  switch (k) {
    case TrafficStateKind::kFreeFlow: return 0.3;
    case TrafficStateKind::kOnsetOfCongestion: return 0.8;
    case TrafficStateKind::kCongested: return 2.0;
  }
  return 0.0;
}

/// Capacity density: the maximum flow 1/t_p is reached at speed v_m.
inline double capacity_density(double t_p, double v_m) { return 1.0 / (t_p * v_m); }

// ---------------------------------------------------------------------------
// Car following and fundamental diagram.

/// IDM acceleration. Pass gap = +inf and closing_speed = 0 for a free road.
/// The result never drives v below zero within one step of length `dt`.
inline double idm_accel(double v, double gap, double closing_speed, const IdmParams& p,
                        double dt = 0.0) {
  double interaction = 0.0;
  if (std::isfinite(gap)) {
    if (!(gap > 0.0)) throw SimulationIntegrityError("IDM called with non-positive gap");
    const double dyn = v * p.T + v * closing_speed / (2.0 * std::sqrt(p.a * p.b));
    const double s_star = p.s0 + std::max(0.0, dyn);
    interaction = (s_star / gap) * (s_star / gap);
  }
  const double free_term = std::pow(v / p.v0, p.delta);
  double acc = p.a * (1.0 - free_term - interaction);
  if (dt > 0.0) acc = std::max(acc, -v / dt);
  return acc;
}

/// Greenberg speed-density relation, clamped to [0, v_cap].
inline double greenberg_speed(double k, double v_m, double k_j,
                              double v_cap = std::numeric_limits<double>::infinity()) {
  if (!(k > 0.0) || k > k_j) throw std::domain_error("density must lie in (0, k_j]");
  return std::clamp(v_m * std::log(k_j / k), 0.0, v_cap);
}

// ---------------------------------------------------------------------------
// Platoon bookkeeping.

/// Maps a normal draw onto the ascending schedule levels.
inline int schedule_level(double draw, const std::array<int, 3>& levels) {
  for (int level : levels) {
    if (draw <= level) return level;
  }
  return levels.back();
}

/// Draws a splitting countdown (in road pieces) for a platoon formed in `lane`.
inline int schedule_split(Lane lane, const BehaviorParams& bp, RandomStreams& rng) {
  const bool left = lane == Lane::kLeft;
  const double draw = rng.normal(RandomStreams::kSchedule, left ? bp.mu_sch_left : bp.mu_sch_right,
                                 left ? bp.sigma_sch_left : bp.sigma_sch_right);
  return schedule_level(draw, bp.schedule_levels);
}

/// Repairs platoon chains in one lane after vehicles left or moved: a
/// follower whose predecessor is not in its platoon heads the remainder, and
/// a leader without followers becomes a free agent.
inline void normalize_platoons(std::vector<VehicleState>& lane) {
  VehicleId head = kNoVehicle;
  for (std::size_t i = 0; i < lane.size(); ++i) {
    auto& v = lane[i];
    auto& m = v.membership;
    if (m.kind == MembershipKind::kFollower) {
      const bool linked = i > 0 && lane[i - 1].membership.is_member() && head != kNoVehicle &&
                          (lane[i - 1].id == m.leader_id || lane[i - 1].membership.leader_id == m.leader_id) &&
                          head == m.leader_id;
      if (!linked) {
        m.kind = MembershipKind::kLeader;
        m.leader_id = kNoVehicle;
        head = v.id;
        // Remaining followers of the old head now follow v.
        for (std::size_t j = i + 1; j < lane.size(); ++j) {
          auto& w = lane[j].membership;
          if (w.kind != MembershipKind::kFollower) break;
          w.leader_id = v.id;
        }
      }
    } else if (m.kind == MembershipKind::kLeader) {
      head = v.id;
    } else {
      head = kNoVehicle;
    }
  }
  for (std::size_t i = 0; i < lane.size(); ++i) {
    auto& m = lane[i].membership;
    if (m.kind != MembershipKind::kLeader) continue;
    const bool has_follower = i + 1 < lane.size() &&
                              lane[i + 1].membership.kind == MembershipKind::kFollower &&
                              lane[i + 1].membership.leader_id == lane[i].id;
    if (!has_follower) m = PlatoonMembership::free();
  }
}

/// Removes vehicle at `idx` from its platoon; the vehicles behind it (if any)
/// keep their countdown under a new head.
inline void detach_member(std::vector<VehicleState>& lane, std::size_t idx) {
  lane[idx].membership = PlatoonMembership::free();
  normalize_platoons(lane);
}

// ---------------------------------------------------------------------------
// Update step.

/// How the traffic model treats the subject vehicle.
struct SubjectHooks {
  bool idm_driven = true;         // car-following subject (no planner)
  bool accepts_merge = false;     // others may merge behind the subject
  bool hold_dissolution = false;  // the subject's platoon may not dissolve yet
  /// Moves the subject over one step when it is not IDM-driven.
  std::function<void(VehicleState&)> advance;
};

namespace detail {

inline double time_gap_for(const VehicleState& v, const BehaviorParams& bp) {
  return v.membership.kind == MembershipKind::kFollower ? bp.t_g : bp.t_p;
}

inline IdmParams idm_for(const VehicleState& v, const BehaviorParams& bp, const RoadNetwork& net) {
  IdmParams p = bp.idm;
  p.v0 = net.v_max(v.lane);
  p.T = time_gap_for(v, bp);
  return p;
}

inline bool in_lane_change(const VehicleState& v) { return v.lc_remaining > 0.0; }

}  // namespace detail

/// Upstream-boundary inflow spacing per lane [m]; zero disables inflow.
struct InflowSpec {
  std::array<double, 2> spacing{0.0, 0.0};
};

/// On-ramp entries. Returns the vehicles that entered this epoch.
inline std::vector<VehicleState> try_spawn_onramp(WorldState& world, const BehaviorParams& bp) {
  std::vector<VehicleState> spawned;
  const auto& net = *world.network;
  for (double ramp : net.onramp_points()) {
    if (!world.rng.bernoulli(RandomStreams::kSpawn, bp.p_on)) continue;
    auto& lane = world.lane(Lane::kRight);
    const std::size_t behind = detail::first_behind(lane, ramp);
    const VehicleState* down = behind > 0 ? &lane[behind - 1] : nullptr;
    const VehicleState* up = behind < lane.size() ? &lane[behind] : nullptr;
    const double v_new = down != nullptr ? down->v : net.v_m(Lane::kRight);
    if (down != nullptr && !(down->rear() - ramp >= bp.t_p * v_new)) continue;
    if (up != nullptr) {
      if (!(ramp - bp.l_car - up->x >= bp.t_p * up->v)) continue;
      if (up->membership.kind == MembershipKind::kFollower) continue;  // no cutting into platoons
    }
    if (down != nullptr && !(down->rear() - ramp > 0.0)) continue;
    VehicleState v;
    v.id = world.next_id++;
    v.lane = Lane::kRight;
    v.x = ramp;
    v.x_prev = ramp;
    v.v = v_new;
    v.length = bp.l_car;
    v.platoon_enabled = !world.rng.bernoulli(RandomStreams::kFlags, bp.p_npe);
    world.insert(v);
    world.log(EventKind::kEnter, v);
    spawned.push_back(v);
  }
  return spawned;
}

/// Off-ramp exits of marked right-lane free agents about to pass a ramp.
inline std::vector<VehicleId> try_exit_offramp(WorldState& world, const BehaviorParams& bp) {
  std::vector<VehicleId> removed;
  const auto ramps = world.network->offramp_points();
  auto& lane = world.lane(Lane::kRight);
  for (auto& v : lane) {
    if (v.is_subject) continue;
    v.marked_exit = world.rng.bernoulli(RandomStreams::kExit, bp.p_off);
    if (!v.marked_exit || !v.membership.is_free() || detail::in_lane_change(v)) continue;
    for (double r : ramps) {
      if (v.x < r && v.v > 0.0 && (r - v.x) / v.v < bp.tau_s) {
        removed.push_back(v.id);
        world.log(EventKind::kExit, v, kNoVehicle, r);
        break;
      }
    }
  }
  if (!removed.empty()) {
    std::erase_if(lane, [&](const VehicleState& v) {
      return std::find(removed.begin(), removed.end(), v.id) != removed.end();
    });
    normalize_platoons(lane);
  }
  for (Lane l : {Lane::kRight, Lane::kLeft}) {
    auto& ln = world.lane(l);
    const double end = world.network->total_length();
    bool any = false;
    for (const auto& v : ln) {
      if (!v.is_subject && v.x >= end) {
        world.log(EventKind::kLeave, v);
        removed.push_back(v.id);
        any = true;
      }
    }
    if (any) {
      std::erase_if(ln, [end](const VehicleState& v) { return !v.is_subject && v.x >= end; });
      normalize_platoons(ln);
    }
  }
  return removed;
}

/// Upstream-boundary inflow keeping the configured spacing.
inline void inflow_upstream(WorldState& world, const BehaviorParams& bp, const InflowSpec& inflow) {
  for (Lane l : {Lane::kRight, Lane::kLeft}) {
    const double spacing = inflow.spacing[lane_index(l)];
    if (!(spacing > 0.0)) continue;
    auto& lane = world.lane(l);
    if (!lane.empty() && lane.back().x < world.upstream_x + spacing) continue;
    VehicleState v;
    v.id = world.next_id++;
    v.lane = l;
    v.x = world.upstream_x;
    v.x_prev = v.x;
    v.v = lane.empty() ? world.network->v_m(l) : lane.back().v;
    v.length = bp.l_car;
    v.platoon_enabled = !world.rng.bernoulli(RandomStreams::kFlags, bp.p_npe);
    lane.push_back(v);
    world.log(EventKind::kInflow, v);
  }
}

namespace detail {

/// Interior boundary in (from, to], or NaN.
inline double crossed_boundary(const RoadNetwork& net, double from, double to) {
  for (const auto& p : net.pieces()) {
    if (p.index == 1) continue;
    if (from < p.start_x && p.start_x <= to) return p.start_x;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

inline bool platoon_contains(const std::vector<VehicleState>& lane, std::size_t head,
                             std::size_t& tail, bool& has_subject) {
  tail = head;
  has_subject = lane[head].is_subject;
  const VehicleId id = lane[head].id;
  while (tail + 1 < lane.size() && lane[tail + 1].membership.kind == MembershipKind::kFollower &&
         lane[tail + 1].membership.leader_id == id) {
    ++tail;
    has_subject = has_subject || lane[tail].is_subject;
  }
  return tail > head;
}

}  // namespace detail

/// Merges at piece transitions, countdown bookkeeping and tail-first
/// dissolution.
inline void merge_split_at_transitions(WorldState& world, const BehaviorParams& bp,
                                       const SubjectHooks& hooks = {}) {
  const auto& net = *world.network;
  for (Lane l : {Lane::kRight, Lane::kLeft}) {
    auto& lane = world.lane(l);

    // A platoon whose head crossed a transition moves one piece closer to
    // its splitting position; at zero it starts dissolving there unless the
    // subject holds it together.
    for (std::size_t i = 0; i < lane.size(); ++i) {
      auto& head = lane[i].membership;
      if (head.kind != MembershipKind::kLeader || head.dissolving) continue;
      const double b = detail::crossed_boundary(net, lane[i].x_prev, lane[i].x);
      if (std::isnan(b)) continue;
      std::size_t tail = i;
      bool has_subject = false;
      detail::platoon_contains(lane, i, tail, has_subject);
      const int next = std::max(0, head.split_countdown - 1);
      for (std::size_t j = i; j <= tail; ++j) lane[j].membership.split_countdown = next;
      if (next > 0 || (has_subject && hooks.hold_dissolution)) continue;
      for (std::size_t j = i; j <= tail; ++j) lane[j].membership.dissolving = true;
      world.event_log.add(Event{world.clock(), EventKind::kDissolve, lane[i].id, kNoVehicle, l, b,
                                lane[i].x, 0});
    }

    // Tail-first detaching: a detaching vehicle turns free once its time gap
    // reaches t_p; only then may the next tail member start detaching.
    for (std::size_t i = 0; i < lane.size(); ++i) {
      auto& v = lane[i];
      if (v.membership.kind != MembershipKind::kDissolving) continue;
      const double gap = i > 0 ? bumper_gap(lane[i - 1], v) : std::numeric_limits<double>::infinity();
      if (gap >= bp.t_p * v.v) {
        v.membership = PlatoonMembership::free();
        world.log(EventKind::kFree, v);
      }
    }
    for (std::size_t i = 0; i < lane.size(); ++i) {
      if (lane[i].membership.kind != MembershipKind::kLeader || !lane[i].membership.dissolving) continue;
      std::size_t tail = i;
      bool has_subject = false;
      if (!detail::platoon_contains(lane, i, tail, has_subject)) {
        lane[i].membership = PlatoonMembership::free();
        world.log(EventKind::kFree, lane[i]);
        continue;
      }
      // Wait while the previous detacher is still opening its gap.
      if (tail + 1 < lane.size() && lane[tail + 1].membership.kind == MembershipKind::kDissolving) continue;
      auto& t = lane[tail];
      if (t.is_subject) continue;  // the subject detaches itself through its planner
      const VehicleId former = t.membership.leader_id;
      t.membership = PlatoonMembership::detaching();
      world.log(EventKind::kDetach, t, former);
      if (tail == i + 1) {
        lane[i].membership = PlatoonMembership::free();
        world.log(EventKind::kFree, lane[i]);
      }
    }

    // Merges: an eligible vehicle crossing a transition joins its immediate
    // downstream free agent or platoon with probability p_merge.
    for (std::size_t i = 1; i < lane.size(); ++i) {
      auto& v = lane[i];
      auto& down = lane[i - 1];
      if (v.is_subject || !v.platoon_enabled || detail::in_lane_change(v)) continue;
      const auto& vm = v.membership;
      if (!(vm.kind == MembershipKind::kFree || (vm.kind == MembershipKind::kLeader && !vm.dissolving))) continue;
      const double b = detail::crossed_boundary(net, v.x_prev, v.x);
      if (std::isnan(b)) continue;
      const auto& dm = down.membership;
      if (!down.platoon_enabled || detail::in_lane_change(down) || dm.dissolving ||
          dm.kind == MembershipKind::kDissolving) {
        continue;
      }
      if (down.is_subject && !hooks.accepts_merge) continue;
      if (!world.rng.bernoulli(RandomStreams::kMerge, bp.p_merge)) continue;
      VehicleId head;
      int countdown;
      if (dm.kind == MembershipKind::kFree) {
        countdown = schedule_split(l, bp, world.rng);
        down.membership = PlatoonMembership::leader(countdown);
        head = down.id;
      } else {
        head = dm.kind == MembershipKind::kLeader ? down.id : dm.leader_id;
        countdown = dm.split_countdown;
      }
      const VehicleId old_head = v.id;
      const bool was_leader = vm.kind == MembershipKind::kLeader;
      v.membership = PlatoonMembership::follower(head, countdown);
      if (was_leader) {
        for (std::size_t j = i + 1; j < lane.size(); ++j) {
          auto& w = lane[j].membership;
          if (w.kind != MembershipKind::kFollower || w.leader_id != old_head) break;
          w.leader_id = head;
          w.split_countdown = countdown;
        }
      }
      world.event_log.add(Event{world.clock(), EventKind::kMerge, v.id, down.id, l, b, v.x, countdown});
    }
  }
}

/// Random lane changing: at most one qualified free agent starts a lane
/// change per step (the most upstream intender wins).
inline std::optional<VehicleId> rlc_lane_change(WorldState& world, const BehaviorParams& bp) {
  const double now = world.clock();
  struct Candidate {
    Lane from;
    std::size_t idx;
    double x;
  };
  std::optional<Candidate> chosen;
  auto recent = [&](const VehicleState& v) { return now - v.last_lane_change_time < bp.t_lc; };
  for (Lane l : {Lane::kRight, Lane::kLeft}) {
    const auto& lane = world.lane(l);
    const auto& target = world.lane(other_lane(l));
    for (std::size_t i = 0; i < lane.size(); ++i) {
      const auto& v = lane[i];
      if (v.is_subject || !v.membership.is_free() || detail::in_lane_change(v) || recent(v)) continue;
      if (v.x < world.upstream_x) continue;
      if (i > 0 && (bumper_gap(lane[i - 1], v) <= bp.d_cg || recent(lane[i - 1]))) continue;
      if (i + 1 < lane.size() && recent(lane[i + 1])) continue;
      const std::size_t behind = detail::first_behind(target, v.x);
      if (behind > 0) {
        const auto& tl = target[behind - 1];
        if (tl.x - tl.length - v.x <= bp.d_cg || recent(tl)) continue;
      }
      if (behind < target.size()) {
        const auto& tf = target[behind];
        if (v.x - v.length - tf.x <= bp.d_cg || recent(tf)) continue;
        if (tf.membership.kind == MembershipKind::kFollower) continue;
      }
      if (!world.rng.bernoulli(RandomStreams::kLaneChange, bp.p_change)) continue;
      if (!chosen || v.x < chosen->x) chosen = Candidate{l, i, v.x};
    }
  }
  if (!chosen) return std::nullopt;
  auto& from = world.lane(chosen->from);
  VehicleState v = from[chosen->idx];
  from.erase(from.begin() + static_cast<std::ptrdiff_t>(chosen->idx));
  v.lane = other_lane(chosen->from);
  v.last_lane_change_time = now;
  v.lc_remaining = bp.t_lcp;
  v.lateral = 0.0;
  auto& placed = world.insert(v);
  const auto& target = world.lane(placed.lane);
  const std::size_t idx = static_cast<std::size_t>(&placed - target.data());
  placed.lc_target_speed = idx > 0 ? target[idx - 1].v : placed.v;
  world.log(EventKind::kLaneChange, placed);
  normalize_platoons(from);
  return placed.id;
}

/// Integrates one vehicle ballistically over dt with v clamped at zero.
inline void integrate(VehicleState& v, double acc, double dt) {
  v.x_prev = v.x;
  const double v_new = v.v + acc * dt;
  if (v_new < 0.0) {
    v.x += acc < 0.0 ? v.v * v.v / (-2.0 * acc) : 0.0;
    v.a = -v.v / dt;
    v.v = 0.0;
  } else {
    v.x += v.v * dt + 0.5 * acc * dt * dt;
    v.a = acc;
    v.v = v_new;
  }
}

/// Velocity adjustment and position update for every vehicle.
inline void car_following(WorldState& world, const BehaviorParams& bp, const SubjectHooks& hooks) {
  const double dt = bp.tau_s;
  const auto& net = *world.network;
  for (Lane l : {Lane::kRight, Lane::kLeft}) {
    auto& lane = world.lane(l);
    std::vector<double> acc(lane.size(), 0.0);
    for (std::size_t i = 0; i < lane.size(); ++i) {
      const auto& v = lane[i];
      if (v.is_subject && !hooks.idm_driven) continue;
      const IdmParams p = detail::idm_for(v, bp, net);
      double gap = std::numeric_limits<double>::infinity();
      double closing = 0.0;
      if (i > 0) {
        gap = bumper_gap(lane[i - 1], v);
        closing = v.v - lane[i - 1].v;
      }
      double a = idm_accel(v.v, gap, closing, p, dt);
      if (detail::in_lane_change(v) && i > 0) {
        const double settle = (v.lc_target_speed - v.v) / std::max(v.lc_remaining, dt);
        a = std::min(a, settle);
        a = std::max(a, -v.v / dt);
      }
      acc[i] = a;
    }
    for (std::size_t i = 0; i < lane.size(); ++i) {
      auto& v = lane[i];
      if (v.is_subject && !hooks.idm_driven) {
        v.x_prev = v.x;
        hooks.advance(v);
      } else {
        integrate(v, acc[i], dt);
      }
      if (detail::in_lane_change(v)) {
        v.lc_remaining = std::max(0.0, v.lc_remaining - dt);
        v.lateral = v.lc_remaining > 0.0 ? bp.lane_width * (1.0 - v.lc_remaining / bp.t_lcp) : 0.0;
      }
    }
  }
}

/// Fatal check: finite kinematics, v >= 0 and positive same-lane gaps.
inline void check_integrity(const WorldState& world) {
  for (Lane l : {Lane::kRight, Lane::kLeft}) {
    const auto& lane = world.lane(l);
    for (std::size_t i = 0; i < lane.size(); ++i) {
      const auto& v = lane[i];
      if (!std::isfinite(v.x) || !std::isfinite(v.v) || !std::isfinite(v.a)) {
        throw SimulationIntegrityError("non-finite state for vehicle " + std::to_string(v.id));
      }
      if (v.v < 0.0) throw SimulationIntegrityError("negative speed for vehicle " + std::to_string(v.id));
      if (i > 0 && !(bumper_gap(lane[i - 1], v) > 0.0)) {
        throw SimulationIntegrityError("overlap at t=" + std::to_string(world.clock()) + " between " +
                                       std::to_string(lane[i - 1].id) + " and " +
                                       std::to_string(v.id) + " in lane " + lane_code(l));
      }
    }
  }
}

/// One update epoch of length tau_s.
inline void step(WorldState& world, const BehaviorParams& bp, const SubjectHooks& hooks = {},
                 const InflowSpec& inflow = {}) {
  try_exit_offramp(world, bp);
  try_spawn_onramp(world, bp);
  inflow_upstream(world, bp, inflow);
  merge_split_at_transitions(world, bp, hooks);
  rlc_lane_change(world, bp);
  car_following(world, bp, hooks);
  ++world.step_index;
  check_integrity(world);
}

// ---------------------------------------------------------------------------
// Warm-up.

struct WarmupResult {
  WorldState world;
  InflowSpec inflow;
  std::array<double, 2> density{0.0, 0.0};  // veh/m per lane
};

/// Builds an initial world for one traffic state: Greenberg speeds at a drawn
/// density, jittered equal spacing, then warmup_duration seconds of traffic.
/// The right-lane free agent nearest the origin becomes the subject and the
/// snapshot is shifted so the subject stands exactly at x = 0.
inline WarmupResult warmup(TrafficStateKind kind, std::shared_ptr<const RoadNetwork> network,
                           const ModelParams& mp, std::uint64_t seed) {
  const BehaviorParams bp = BehaviorParams::from(mp);
  WarmupResult out;
  WorldState& w = out.world;
  w.network = std::move(network);
  w.tau_s = mp.tau_s;
  w.rng = RandomStreams(seed);
  w.upstream_x = -mp.lead_in;
  const double kj = mp.jam_density();
  const double factor = density_cutoff_factor(kind);

  for (Lane l : {Lane::kRight, Lane::kLeft}) {
    const double km = capacity_density(mp.t_p, w.network->v_m(l));
    const double cutoff = std::min(factor * km, kj);
    const double k = cutoff * (0.75 + 0.25 * w.rng.uniform(RandomStreams::kWarmup));
    out.density[lane_index(l)] = k;
    const double spacing = 1.0 / k;
    out.inflow.spacing[lane_index(l)] = spacing;
    const double speed = greenberg_speed(k, w.network->v_m(l), kj, w.network->v_max(l));
    const double slack = std::max(0.0, 0.5 * (spacing - mp.l_car) - 0.5);
    auto& lane = w.lane(l);
    for (double x = w.network->total_length() - 1.0; x >= w.upstream_x; x -= spacing) {
      double noise = w.rng.normal(RandomStreams::kWarmup, 0.0, mp.warmup_noise_sigma);
      noise = std::clamp(noise, -slack, slack);
      VehicleState v;
      v.id = w.next_id++;
      v.lane = l;
      v.x = x + noise;
      v.x_prev = v.x;
      v.v = speed;
      v.length = mp.l_car;
      v.platoon_enabled = !w.rng.bernoulli(RandomStreams::kFlags, mp.p_npe);
      lane.push_back(v);
    }
  }
  w.sort_lanes();
  check_integrity(w);

  const auto steps = static_cast<long>(std::llround(mp.warmup_duration / mp.tau_s));
  for (long i = 0; i < steps; ++i) step(w, bp, {}, out.inflow);

  // Promote the right-lane free agent nearest the origin to the subject.
  auto& right = w.lane(Lane::kRight);
  std::size_t best = right.size();
  for (std::size_t i = 0; i < right.size(); ++i) {
    const auto& v = right[i];
    if (!v.membership.is_free() || detail::in_lane_change(v)) continue;
    if (best == right.size() || std::abs(v.x) < std::abs(right[best].x)) best = i;
  }
  if (best == right.size()) throw SimulationIntegrityError("no free vehicle to host the subject");
  const double shift = right[best].x;
  for (auto& l : w.lanes) {
    for (auto& v : l) {
      v.x -= shift;
      v.x_prev -= shift;
    }
  }
  auto& subject = right[best];
  subject.is_subject = true;
  subject.platoon_enabled = false;
  subject.last_lane_change_time = -std::numeric_limits<double>::infinity();
  w.subject_id = subject.id;
  w.step_index = 0;
  w.event_log.clear();
  return out;
}

}  // namespace cavsim
