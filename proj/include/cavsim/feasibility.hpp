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

/// @file feasibility.hpp
/// @brief Sampled constraint checking of subject trajectories: speed limits,
///        time gap to the predicted leader, and acceleration/jerk bounds.

#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "cavsim/parameters.hpp"
#include "cavsim/quintic.hpp"
#include "cavsim/world.hpp"

namespace cavsim {

struct PlanLimits {
  double v_max_right = 20.0;
  double v_max_left = 30.0;
  double a_max = 2.0;
  double j_max = 3.5;
  double t_p = 3.5;
  double t_g = 0.55;
  double horizon = 10.0;
  double lane_width = 3.6;
  double subject_length = 5.0;
  double eps = 1e-6;

  [[nodiscard]] double v_max(Lane lane) const {
    return lane == Lane::kLeft ? v_max_left : v_max_right;
  }

  static PlanLimits from(const ModelParams& p) {
    return {p.v_max_right, p.v_max_left, p.a_max, p.j_max, p.t_p,
            p.t_g,         p.horizon,    p.lane_width, p.l_car, p.feasibility_eps};
  }
};

enum class Violation : std::uint8_t { kNone, kSpeed, kGap, kFollowerGap, kAccel, kJerk };

constexpr std::string_view to_string(Violation v) {
  switch (v) {
    case Violation::kNone: return "none";
    case Violation::kSpeed: return "speed";
    case Violation::kGap: return "gap";
    case Violation::kFollowerGap: return "follower gap";
    case Violation::kAccel: return "acceleration";
    case Violation::kJerk: return "jerk";
  }
  return "?";
}

struct FeasibilityReport {
  bool feasible = true;
  Violation violation = Violation::kNone;
  double t = 0.0;      // time of the first violation
  double value = 0.0;  // offending quantity
  double limit = 0.0;  // bound it broke

  explicit operator bool() const { return feasible; }
};

/// Per-segment time gap to keep to the leader. Segments without an entry use
/// t_p. Platoon waits and merges use t_g.
struct GapPolicy {
  std::vector<double> time_gap;
  double follower_time_gap = 0.55;  // only checked while crossing lanes
};

/// Lane whose center is nearest to lateral coordinate y (right center = 0).
inline Lane lane_at(double y, double lane_width) {
  return y > 0.5 * lane_width ? Lane::kLeft : Lane::kRight;
}

/// Checks one kinematic sample; `time_gap` applies to the leader gap.
inline FeasibilityReport check_sample(const KinematicSample& k, const PlanLimits& limits,
                                      const LeaderPrediction& leaders, double time_gap,
                                      double follower_time_gap) {
  const double eps = limits.eps;
  const Lane lane = lane_at(k.y, limits.lane_width);
  const double vmax = limits.v_max(lane);
  if (k.vx < -eps || k.vx > vmax + eps) return {false, Violation::kSpeed, k.t, k.vx, vmax};

  // Between lane centers both lanes' leaders bind.
  const double lo = 1e-9, hi = limits.lane_width - 1e-9;
  const bool crossing = k.y > lo && k.y < hi;
  const double need = time_gap * k.vx;
  for (Lane l : {Lane::kRight, Lane::kLeft}) {
    if (l != lane && !crossing) continue;
    if (const auto& leader = leaders.leader_in(l)) {
      const double gap = leader->rear_at(k.t) - k.x;
      if (!(gap > need - eps)) return {false, Violation::kGap, k.t, gap, need};
    }
    if (crossing) {
      if (const auto& f = leaders.follower_in(l)) {
        const double gap = k.x - limits.subject_length - f->x_at(k.t);
        const double f_need = follower_time_gap * f->v0;
        if (!(gap > f_need - eps)) return {false, Violation::kFollowerGap, k.t, gap, f_need};
      }
    }
  }

  const double amax = limits.a_max + eps;
  if (std::abs(k.ax) > amax) return {false, Violation::kAccel, k.t, k.ax, limits.a_max};
  if (std::abs(k.ay) > amax) return {false, Violation::kAccel, k.t, k.ay, limits.a_max};
  const double jmax = limits.j_max + eps;
  if (std::abs(k.jx) > jmax) return {false, Violation::kJerk, k.t, k.jx, limits.j_max};
  if (std::abs(k.jy) > jmax) return {false, Violation::kJerk, k.t, k.jy, limits.j_max};
  return {};
}

/// Samples one segment every dt (end point included) and reports the first
/// violation.
inline FeasibilityReport check_segment(const QuinticSegment& seg, const PlanLimits& limits,
                                       const LeaderPrediction& leaders, double dt,
                                       double time_gap, double follower_time_gap) {
  const auto n = static_cast<long>(std::ceil(seg.duration() / dt - 1e-9));
  for (long i = 0; i <= n; ++i) {
    const double tau = std::min(static_cast<double>(i) * dt, seg.duration());
    auto r = check_sample(seg.eval_local(tau), limits, leaders, time_gap, follower_time_gap);
    if (!r.feasible) return r;
  }
  return {};
}

/// Samples the whole trajectory every dt and reports the first violation.
inline FeasibilityReport check_feasibility(const Trajectory& traj, const PlanLimits& limits,
                                           const LeaderPrediction& leaders, double dt = 0.1,
                                           const GapPolicy& policy = {}) {
  if (!(dt > 0.0)) throw std::domain_error("sampling step must be positive");
  const auto& segs = traj.segments();
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const double gap = i < policy.time_gap.size() ? policy.time_gap[i] : limits.t_p;
    auto r = check_segment(segs[i], limits, leaders, dt, gap, policy.follower_time_gap);
    if (!r.feasible) return r;
  }
  return {};
}

}  // namespace cavsim
