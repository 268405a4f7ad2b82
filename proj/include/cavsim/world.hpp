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

/// @file world.hpp
/// @brief Simulation snapshot: vehicles per lane, clock, random streams and
///        the event log, plus the neighbour and prediction queries shared by
///        the traffic model and the planner.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cavsim/road_network.hpp"

namespace cavsim {

using VehicleId = std::uint64_t;
inline constexpr VehicleId kNoVehicle = 0;

enum class MembershipKind : std::uint8_t { kFree, kLeader, kFollower, kDissolving };

constexpr std::string_view to_string(MembershipKind k) {
  switch (k) {
    case MembershipKind::kFree: return "free";
    case MembershipKind::kLeader: return "leader";
    case MembershipKind::kFollower: return "follower";
    case MembershipKind::kDissolving: return "dissolving";
  }
  return "?";
}

struct PlatoonMembership {
  MembershipKind kind = MembershipKind::kFree;
  int split_countdown = 0;          // road pieces until the platoon dissolves
  VehicleId leader_id = kNoVehicle;  // platoon head, for followers
  bool dissolving = false;           // schedule reached, members detach tail-first

  static PlatoonMembership free() { return {}; }
  static PlatoonMembership leader(int countdown) {
    return {MembershipKind::kLeader, countdown, kNoVehicle, false};
  }
  static PlatoonMembership follower(VehicleId leader, int countdown) {
    return {MembershipKind::kFollower, countdown, leader, false};
  }
  static PlatoonMembership detaching() { return {MembershipKind::kDissolving, 0, kNoVehicle, true}; }

  [[nodiscard]] bool is_free() const { return kind == MembershipKind::kFree; }
  [[nodiscard]] bool is_member() const {
    return kind == MembershipKind::kLeader || kind == MembershipKind::kFollower;
  }
  bool operator==(const PlatoonMembership&) const = default;
};

struct VehicleState {
  VehicleId id = kNoVehicle;
  Lane lane = Lane::kRight;
  double x = 0.0;        // front bumper [m]
  double lateral = 0.0;  // progress across the lane during a lane change [m]
  double v = 0.0;
  double a = 0.0;
  double length = 5.0;
  bool platoon_enabled = false;
  PlatoonMembership membership;
  double last_lane_change_time = -std::numeric_limits<double>::infinity();
  bool marked_exit = false;

  bool is_subject = false;
  double x_prev = 0.0;          // position at the start of the current step
  double lc_remaining = 0.0;    // surrounding lane change still in progress [s]
  double lc_target_speed = 0.0;

  [[nodiscard]] double rear() const { return x - length; }
};

/// Bumper-to-bumper gap from a follower to its leader.
inline double bumper_gap(const VehicleState& leader, const VehicleState& follower) {
  return leader.x - leader.length - follower.x;
}

enum class EventKind : std::uint8_t {
  kEnter,       // on-ramp entry
  kInflow,      // upstream boundary inflow
  kExit,        // off-ramp exit
  kLeave,       // drove past the end of the network
  kMerge,       // id merged with the platoon/vehicle ahead (other)
  kDissolve,    // platoon headed by id reached its splitting position
  kDetach,      // id left its platoon tail-first (other = former leader)
  kFree,        // a detaching vehicle reached t_p and is a free agent again
  kLaneChange,  // id changed into `lane`
  kPlan,        // subject planner decision (code = target, value = cost)
  kFallback,    // subject fell back to car following
  kSubjectMerge,
  kSubjectSplit,
  kSubjectLaneChange,
};

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::kEnter: return "ENTER";
    case EventKind::kInflow: return "INFLOW";
    case EventKind::kExit: return "EXIT";
    case EventKind::kLeave: return "LEAVE";
    case EventKind::kMerge: return "MERGE";
    case EventKind::kDissolve: return "DISSOLVE";
    case EventKind::kDetach: return "DETACH";
    case EventKind::kFree: return "FREE";
    case EventKind::kLaneChange: return "LANE_CHANGE";
    case EventKind::kPlan: return "PLAN";
    case EventKind::kFallback: return "FALLBACK";
    case EventKind::kSubjectMerge: return "SUBJECT_MERGE";
    case EventKind::kSubjectSplit: return "SUBJECT_SPLIT";
    case EventKind::kSubjectLaneChange: return "SUBJECT_LANE_CHANGE";
  }
  return "?";
}

struct Event {
  double t = 0.0;
  EventKind kind = EventKind::kEnter;
  VehicleId id = kNoVehicle;
  VehicleId other = kNoVehicle;
  Lane lane = Lane::kRight;
  double x = 0.0;
  double value = 0.0;
  int code = 0;
};

/// Append-only record of discrete simulation events.
class EventLog {
 public:
  void add(const Event& e) {
    if (enabled_) events_.push_back(e);
  }
  void set_enabled(bool on) { enabled_ = on; }
  void clear() { events_.clear(); }
  [[nodiscard]] const std::vector<Event>& events() const { return events_; }

  /// One event per line: `time KIND id other lane x value code`.
  void write(std::ostream& out) const {
    char buf[192];
    for (const auto& e : events_) {
      std::snprintf(buf, sizeof buf, "%.1f %s %llu %llu %c %.9g %.9g %d\n", e.t, to_string(e.kind),
                    static_cast<unsigned long long>(e.id),
                    static_cast<unsigned long long>(e.other), lane_code(e.lane), e.x, e.value,
                    e.code);
      out << buf;
    }
  }

 private:
  std::vector<Event> events_;
  bool enabled_ = true;
};

/// Independent named random streams derived from one scenario seed, so
/// toggling one behaviour never shifts the draws of another.
class RandomStreams {
 public:
  enum Stream : std::size_t { kSpawn, kExit, kMerge, kSchedule, kLaneChange, kWarmup, kFlags, kCount };

  explicit RandomStreams(std::uint64_t seed = 0) {
    for (std::size_t i = 0; i < kCount; ++i) {
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(i), 0x9e3779b9u};
      engines_[i].seed(seq);
    }
  }

  double uniform(Stream s) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(engines_[s]);
  }
  bool bernoulli(Stream s, double p) { return uniform(s) < p; }
  double normal(Stream s, double mean, double sigma) {
    return std::normal_distribution<double>(mean, sigma)(engines_[s]);
  }

 private:
  std::array<std::mt19937_64, kCount> engines_;
};

/// Full simulation snapshot. Each lane is kept sorted by descending x.
struct WorldState {
  std::int64_t step_index = 0;
  double tau_s = 0.4;
  std::shared_ptr<const RoadNetwork> network;
  std::array<std::vector<VehicleState>, 2> lanes;
  VehicleId subject_id = kNoVehicle;
  VehicleId next_id = 1;
  double upstream_x = 0.0;  // upstream end of the simulated road
  RandomStreams rng;
  EventLog event_log;

  [[nodiscard]] double clock() const { return static_cast<double>(step_index) * tau_s; }

  std::vector<VehicleState>& lane(Lane l) { return lanes[lane_index(l)]; }
  [[nodiscard]] const std::vector<VehicleState>& lane(Lane l) const {
    return lanes[lane_index(l)];
  }

  [[nodiscard]] std::size_t vehicle_count() const { return lanes[0].size() + lanes[1].size(); }

  void sort_lanes() {
    for (auto& l : lanes) {
      std::stable_sort(l.begin(), l.end(),
                       [](const VehicleState& a, const VehicleState& b) { return a.x > b.x; });
    }
  }

  [[nodiscard]] const VehicleState* find(VehicleId id) const {
    for (const auto& l : lanes) {
      for (const auto& v : l) {
        if (v.id == id) return &v;
      }
    }
    return nullptr;
  }
  VehicleState* find(VehicleId id) {
    return const_cast<VehicleState*>(static_cast<const WorldState&>(*this).find(id));
  }

  [[nodiscard]] const VehicleState& get(VehicleId id) const {
    const auto* v = find(id);
    if (v == nullptr) throw std::domain_error("unknown vehicle id " + std::to_string(id));
    return *v;
  }

  [[nodiscard]] const VehicleState* subject() const {
    return subject_id == kNoVehicle ? nullptr : find(subject_id);
  }

  void log(EventKind kind, const VehicleState& v, VehicleId other = kNoVehicle,
           double value = 0.0, int code = 0) {
    event_log.add(Event{clock(), kind, v.id, other, v.lane, v.x, value, code});
  }

  /// Inserts keeping descending order; returns a reference to the stored copy.
  VehicleState& insert(VehicleState v) {
    auto& l = lane(v.lane);
    auto it = std::lower_bound(l.begin(), l.end(), v.x,
                               [](const VehicleState& a, double x) { return a.x > x; });
    return *l.insert(it, v);
  }
};

namespace detail {

/// Index of the first vehicle in `l` strictly behind x (descending order).
inline std::size_t first_behind(const std::vector<VehicleState>& l, double x) {
  auto it = std::partition_point(l.begin(), l.end(), [x](const VehicleState& v) { return v.x >= x; });
  return static_cast<std::size_t>(it - l.begin());
}

/// Index of the first vehicle at or behind x.
inline std::size_t first_at_or_behind(const std::vector<VehicleState>& l, double x) {
  auto it = std::partition_point(l.begin(), l.end(), [x](const VehicleState& v) { return v.x > x; });
  return static_cast<std::size_t>(it - l.begin());
}

}  // namespace detail

/// Nearest vehicle strictly ahead of `vehicle_id` in `lane`.
inline std::optional<VehicleState> leader_of(const WorldState& world, VehicleId vehicle_id,
                                             Lane lane) {
  const auto& me = world.get(vehicle_id);
  const auto& l = world.lane(lane);
  const std::size_t idx = detail::first_at_or_behind(l, me.x);
  if (idx == 0) return std::nullopt;
  return l[idx - 1];
}

/// Nearest vehicle strictly behind `vehicle_id` in `lane`.
inline std::optional<VehicleState> follower_of(const WorldState& world, VehicleId vehicle_id,
                                               Lane lane) {
  const auto& me = world.get(vehicle_id);
  const auto& l = world.lane(lane);
  std::size_t idx = detail::first_behind(l, me.x);
  if (idx >= l.size()) return std::nullopt;
  return l[idx];
}

/// The `n_per_lane` nearest vehicles behind the subject in each lane.
inline std::vector<VehicleState> upstream_sample(const WorldState& world, std::size_t n_per_lane) {
  if (n_per_lane < 1) throw std::invalid_argument("n_per_lane must be at least 1");
  std::vector<VehicleState> out;
  const auto* subject = world.subject();
  if (subject == nullptr) return out;
  for (Lane lane : {Lane::kRight, Lane::kLeft}) {
    const auto& l = world.lane(lane);
    std::size_t idx = detail::first_behind(l, subject->x);
    for (std::size_t k = 0; k < n_per_lane && idx + k < l.size(); ++k) out.push_back(l[idx + k]);
  }
  return out;
}

/// Constant-velocity extrapolation of one neighbour.
struct PredictedTrack {
  VehicleId id = kNoVehicle;
  Lane lane = Lane::kRight;
  double t0 = 0.0;
  double x0 = 0.0;
  double v0 = 0.0;
  double length = 5.0;
  bool platoon_enabled = false;
  PlatoonMembership membership;

  [[nodiscard]] double x_at(double t) const { return x0 + v0 * (t - t0); }
  [[nodiscard]] double rear_at(double t) const { return x_at(t) - length; }
};

struct PredictionSample {
  double t;
  double x;
  double v;
};

/// Predicted motion of the subject's current and prospective neighbours.
struct LeaderPrediction {
  double t0 = 0.0;
  double horizon = 0.0;
  std::array<std::optional<PredictedTrack>, 2> leader;    // per lane
  std::array<std::optional<PredictedTrack>, 2> follower;  // per lane

  [[nodiscard]] const std::optional<PredictedTrack>& leader_in(Lane l) const {
    return leader[lane_index(l)];
  }
  [[nodiscard]] const std::optional<PredictedTrack>& follower_in(Lane l) const {
    return follower[lane_index(l)];
  }

  /// Uniformly spaced samples of a track over [t0, t0 + horizon].
  [[nodiscard]] std::vector<PredictionSample> samples(const PredictedTrack& track, double dt) const {
    std::vector<PredictionSample> out;
    const auto n = static_cast<long>(std::floor(horizon / dt + 1e-9));
    out.reserve(static_cast<std::size_t>(n + 1));
    for (long i = 0; i <= n; ++i) {
      const double t = t0 + static_cast<double>(i) * dt;
      out.push_back({t, track.x_at(t), track.v0});
    }
    return out;
  }
};

inline PredictedTrack make_track(const VehicleState& v, double t0) {
  return PredictedTrack{v.id, v.lane, t0, v.x, v.v, v.length, v.platoon_enabled, v.membership};
}

/// Constant-velocity prediction of the subject's leaders and followers in
/// both lanes, starting at the current clock.
inline LeaderPrediction predict_leaders(const WorldState& world, double horizon) {
  const auto* subject = world.subject();
  if (subject == nullptr) throw std::domain_error("world has no subject vehicle");
  LeaderPrediction p;
  p.t0 = world.clock();
  p.horizon = horizon;
  for (Lane lane : {Lane::kRight, Lane::kLeft}) {
    if (auto l = leader_of(world, subject->id, lane)) p.leader[lane_index(lane)] = make_track(*l, p.t0);
    if (auto f = follower_of(world, subject->id, lane)) {
      p.follower[lane_index(lane)] = make_track(*f, p.t0);
    }
  }
  return p;
}

/// Writes a `SNAP id lane x v a enabled membership countdown` line per vehicle.
inline void write_snapshot(std::ostream& out, const WorldState& world) {
  char buf[192];
  for (Lane lane : {Lane::kRight, Lane::kLeft}) {
    for (const auto& v : world.lane(lane)) {
      std::snprintf(buf, sizeof buf, "%.1f SNAP %llu %c %.9g %.9g %.9g %d %d %d\n", world.clock(),
                    static_cast<unsigned long long>(v.id), lane_code(lane), v.x, v.v, v.a,
                    v.platoon_enabled ? 1 : 0, static_cast<int>(v.membership.kind),
                    v.membership.split_countdown);
      out << buf;
    }
  }
}

}  // namespace cavsim
