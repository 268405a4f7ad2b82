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

/// @file quintic.hpp
/// @brief Quintic motion segments in x (longitudinal) and y (lateral).
///
/// Each axis of a segment is the unique degree-5 polynomial that matches
/// position, velocity and acceleration at both ends of its time window.
/// Internally the polynomial is kept in normalized time s = (t - t0) / T,
/// which keeps endpoint residuals at round-off level even for long or very
/// short windows; `coeffs_x`/`coeffs_y` convert back to seconds.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "cavsim/maneuver.hpp"

namespace cavsim {

struct BoundaryState {
  double x = 0.0;
  double vx = 0.0;
  double ax = 0.0;
  double y = 0.0;
  double vy = 0.0;
  double ay = 0.0;
};

struct KinematicSample {
  double t = 0.0;
  double x = 0.0, y = 0.0;
  double vx = 0.0, vy = 0.0;
  double ax = 0.0, ay = 0.0;
  double jx = 0.0, jy = 0.0;

  [[nodiscard]] BoundaryState boundary() const { return {x, vx, ax, y, vy, ay}; }
};

/// One axis of a quintic in normalized time.
struct NormalizedQuintic {
  std::array<double, 6> d{};  // x(s) = sum d[k] s^k, s in [0, 1]

  static NormalizedQuintic fit(double p0, double v0, double a0, double p1, double v1,
                               double a1, double duration) {
    const double T = duration;
    const double V0 = v0 * T, V1 = v1 * T;
    const double A0 = a0 * T * T, A1 = a1 * T * T;
    const double h = p1 - p0;
    NormalizedQuintic q;
    q.d[0] = p0;
    q.d[1] = V0;
    q.d[2] = 0.5 * A0;
    q.d[3] = 0.5 * (20.0 * h - (8.0 * V1 + 12.0 * V0) - (3.0 * A0 - A1));
    q.d[4] = 0.5 * (-30.0 * h + (14.0 * V1 + 16.0 * V0) + (3.0 * A0 - 2.0 * A1));
    q.d[5] = 0.5 * (12.0 * h - 6.0 * (V1 + V0) + (A1 - A0));
    return q;
  }

  // Derivatives with respect to s; callers divide by T^k.
  [[nodiscard]] double p(double s) const {
    return d[0] + s * (d[1] + s * (d[2] + s * (d[3] + s * (d[4] + s * d[5]))));
  }
  [[nodiscard]] double dp(double s) const {
    return d[1] + s * (2 * d[2] + s * (3 * d[3] + s * (4 * d[4] + s * 5 * d[5])));
  }
  [[nodiscard]] double ddp(double s) const {
    return 2 * d[2] + s * (6 * d[3] + s * (12 * d[4] + s * 20 * d[5]));
  }
  [[nodiscard]] double dddp(double s) const {
    return 6 * d[3] + s * (24 * d[4] + s * 60 * d[5]);
  }
};

class QuinticSegment {
 public:
  QuinticSegment() = default;
  QuinticSegment(NormalizedQuintic x, NormalizedQuintic y, double t_start, double duration,
                 SubAction sub_action)
      : x_(x), y_(y), t_start_(t_start), duration_(duration), inv_t_(1.0 / duration),
        sub_action_(sub_action) {}

  [[nodiscard]] double t_start() const { return t_start_; }
  [[nodiscard]] double duration() const { return duration_; }
  [[nodiscard]] double t_end() const { return t_start_ + duration_; }
  [[nodiscard]] SubAction sub_action() const { return sub_action_; }
  [[nodiscard]] const NormalizedQuintic& x_poly() const { return x_; }
  [[nodiscard]] const NormalizedQuintic& y_poly() const { return y_; }

  /// Coefficients a_0..a_5 of x(τ) in local seconds τ = t - t_start.
  [[nodiscard]] std::array<double, 6> coeffs_x() const { return to_seconds(x_); }
  [[nodiscard]] std::array<double, 6> coeffs_y() const { return to_seconds(y_); }

  /// Kinematics at absolute time t; throws outside the segment window.
  [[nodiscard]] KinematicSample eval(double t) const {
    constexpr double kSlack = 1e-9;
    if (t < t_start_ - kSlack || t > t_end() + kSlack) {
      throw std::domain_error("time outside segment window");
    }
    return eval_local(std::clamp(t - t_start_, 0.0, duration_));
  }

  /// Kinematics at local time tau in [0, duration]; unchecked.
  [[nodiscard]] KinematicSample eval_local(double tau) const {
    const double s = tau * inv_t_;
    const double i1 = inv_t_, i2 = i1 * i1, i3 = i2 * i1;
    KinematicSample k;
    k.t = t_start_ + tau;
    k.x = x_.p(s);
    k.vx = x_.dp(s) * i1;
    k.ax = x_.ddp(s) * i2;
    k.jx = x_.dddp(s) * i3;
    k.y = y_.p(s);
    k.vy = y_.dp(s) * i1;
    k.ay = y_.ddp(s) * i2;
    k.jy = y_.dddp(s) * i3;
    return k;
  }

  // Cheap single-quantity accessors for hot loops.
  [[nodiscard]] double x_at(double tau) const { return x_.p(tau * inv_t_); }
  [[nodiscard]] double vx_at(double tau) const { return x_.dp(tau * inv_t_) * inv_t_; }
  [[nodiscard]] double ax_at(double tau) const {
    return x_.ddp(tau * inv_t_) * inv_t_ * inv_t_;
  }

  [[nodiscard]] BoundaryState start_state() const { return eval_local(0.0).boundary(); }
  [[nodiscard]] BoundaryState end_state() const { return eval_local(duration_).boundary(); }

 private:
  std::array<double, 6> to_seconds(const NormalizedQuintic& q) const {
    std::array<double, 6> c{};
    double scale = 1.0;
    for (int k = 0; k < 6; ++k) {
      c[k] = q.d[k] * scale;
      scale *= inv_t_;
    }
    return c;
  }

  NormalizedQuintic x_, y_;
  double t_start_ = 0.0;
  double duration_ = 1.0;
  double inv_t_ = 1.0;
  SubAction sub_action_ = SubAction::kWait;
};

/// Unique quintic segment joining two boundary states in both axes.
inline QuinticSegment solve_segment(const BoundaryState& start, const BoundaryState& end,
                                    double duration, double t_start,
                                    SubAction sub_action = SubAction::kWait) {
  if (!(duration > 0.0) || !std::isfinite(duration)) {
    throw std::domain_error("segment duration must be positive");
  }
  auto x = NormalizedQuintic::fit(start.x, start.vx, start.ax, end.x, end.vx, end.ax, duration);
  auto y = NormalizedQuintic::fit(start.y, start.vy, start.ay, end.y, end.vy, end.ay, duration);
  return QuinticSegment(x, y, t_start, duration, sub_action);
}

/// Constant-acceleration segment (used for IDM-driven windows).
inline QuinticSegment ballistic_segment(const BoundaryState& start, double accel,
                                        double duration, double t_start,
                                        SubAction sub_action = SubAction::kWait) {
  if (!(duration > 0.0)) throw std::domain_error("segment duration must be positive");
  NormalizedQuintic x, y;
  x.d = {start.x, start.vx * duration, 0.5 * accel * duration * duration, 0, 0, 0};
  y.d = {start.y, 0, 0, 0, 0, 0};
  return QuinticSegment(x, y, t_start, duration, sub_action);
}

/// Piecewise-quintic plan over contiguous time windows.
class Trajectory {
 public:
  Trajectory() = default;
  explicit Trajectory(std::vector<QuinticSegment> segments) {
    for (auto& s : segments) append(s);
  }

  void append(const QuinticSegment& seg) {
    if (!segments_.empty() && std::abs(seg.t_start() - segments_.back().t_end()) > 1e-9) {
      throw std::invalid_argument("trajectory segments must be contiguous in time");
    }
    segments_.push_back(seg);
  }

  [[nodiscard]] bool empty() const { return segments_.empty(); }
  [[nodiscard]] const std::vector<QuinticSegment>& segments() const { return segments_; }
  [[nodiscard]] double t_start() const { return segments_.front().t_start(); }
  [[nodiscard]] double t_end() const { return segments_.back().t_end(); }

  /// Segment covering t; at a junction the later segment wins.
  [[nodiscard]] const QuinticSegment& segment_at(double t) const {
    if (segments_.empty()) throw std::domain_error("empty trajectory");
    auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                               [](double v, const QuinticSegment& s) { return v < s.t_start(); });
    if (it == segments_.begin()) return segments_.front();
    return *std::prev(it);
  }

  [[nodiscard]] KinematicSample eval(double t) const { return segment_at(t).eval(t); }

  /// Largest position/velocity/acceleration jump over all junctions.
  [[nodiscard]] double max_junction_mismatch() const {
    double worst = 0.0;
    for (std::size_t i = 1; i < segments_.size(); ++i) {
      const auto a = segments_[i - 1].end_state();
      const auto b = segments_[i].start_state();
      for (double d : {a.x - b.x, a.vx - b.vx, a.ax - b.ax, a.y - b.y, a.vy - b.vy, a.ay - b.ay}) {
        worst = std::max(worst, std::abs(d));
      }
    }
    return worst;
  }

 private:
  std::vector<QuinticSegment> segments_;
};

/// Samples a trajectory every dt as `t,x,y,vx,vy,ax,ay` CSV rows.
inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj, double dt) {
  out << "t,x,y,vx,vy,ax,ay\n";
  if (traj.empty()) return;
  const double t0 = traj.t_start();
  const auto n = static_cast<long>(std::floor((traj.t_end() - t0) / dt + 1e-9));
  char buf[256];
  for (long i = 0; i <= n; ++i) {
    const auto k = traj.eval(t0 + static_cast<double>(i) * dt);
    std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", k.t, k.x, k.y,
                  k.vx, k.vy, k.ax, k.ay);
    out << buf;
  }
}

}  // namespace cavsim
