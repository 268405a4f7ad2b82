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

/// @file experiment.hpp
/// @brief Scenario runner and the controller x traffic state x value-of-time
///        experiment matrix.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "cavsim/controller.hpp"
#include "cavsim/cost_stats.hpp"
#include "cavsim/parameters.hpp"
#include "cavsim/road_network.hpp"
#include "cavsim/traffic.hpp"
#include "cavsim/world.hpp"

namespace cavsim {

inline constexpr std::array<TrafficStateKind, 3> kAllStates{
    TrafficStateKind::kFreeFlow, TrafficStateKind::kOnsetOfCongestion, TrafficStateKind::kCongested};

inline std::optional<TrafficStateKind> parse_state(std::string_view s) {
  for (TrafficStateKind k : kAllStates) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

struct ExperimentConfig {
  std::vector<ControllerKind> controllers{kAllControllers.begin(), kAllControllers.end()};
  std::vector<TrafficStateKind> states{kAllStates.begin(), kAllStates.end()};
  std::vector<double> vots{0.0, 20.0};  // dollars per hour
  int seeds = 25;
  std::uint64_t base_seed = 20190601;
  ModelParams params;
  std::shared_ptr<const RoadNetwork> network;  // reference network when null
  std::string out_dir;                         // no files when empty
  bool write_run_files = true;                 // per-run traces and logs
  int jobs = 1;
  double max_trip_time = 4000.0;  // [s]
  double budget_multiple = 0.0;   // abort when a replan exceeds this many t_upd (0 = off)
};

/// Seed of the warm-up world shared by every controller for (state, index).
inline std::uint64_t scenario_seed(std::uint64_t base, TrafficStateKind state, int index) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (static_cast<std::uint64_t>(state) + 1) +
                    0xbf58476d1ce4e5b9ull * static_cast<std::uint64_t>(index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

struct RunKey {
  ControllerKind controller = ControllerKind::kCF;
  TrafficStateKind state = TrafficStateKind::kFreeFlow;
  double vot = 0.0;
  int seed_index = 0;
};

struct RunResult {
  RunKey key;
  std::uint64_t seed = 0;
  bool completed = false;
  std::string error;
  double trip_time = 0.0;
  CostBreakdown subject;
  std::optional<CostBreakdown> follower;  // immediate upstream vehicle, own lane
  std::optional<double> upstream_mean;          // per 10 km
  std::optional<double> upstream_mean_fuel;     // per 10 km
  int upstream_count = 0;
  ControllerStats stats;
  // Safety audits over executed planner windows.
  long audited_samples = 0;
  long gap_violations = 0;
  long bound_violations = 0;
  double max_abs_accel = 0.0;
  double max_abs_jerk = 0.0;
  long overlaps = 0;
  double wall_seconds = 0.0;
  int budget_violations = 0;  // replans slower than t_upd

  std::vector<TraceSample> subject_trace;
  std::string event_log;
  std::string trajectory_csv;
};

namespace detail {

inline double trace_beta(const PlatoonMembership& m, double beta_free, double beta_platoon, double beta_tr) {
  switch (m.kind) {
    case MembershipKind::kFree: return beta_free;
    case MembershipKind::kLeader:
    case MembershipKind::kFollower: return m.dissolving ? beta_tr : beta_platoon;
    case MembershipKind::kDissolving: return beta_tr;
  }
  return beta_free;
}

/// Independent re-check of one executed window: speed, gap, acceleration
/// and jerk at every sample_dt, written from the constraint definitions.
inline void audit_window(const ExecutedWindow& w, const PlanLimits& lim, double dt, RunResult& r) {
  constexpr double kTol = 1e-6;
  for (std::size_t i = 0; i < w.pieces.size(); ++i) {
    const auto& seg = w.pieces[i];
    const double gap_time = w.time_gaps[i];
    const auto n = static_cast<long>(std::ceil(seg.duration() / dt - 1e-9));
    for (long j = 0; j <= n; ++j) {
      const auto k = seg.eval_local(std::min(static_cast<double>(j) * dt, seg.duration()));
      ++r.audited_samples;
      const Lane lane = k.y > 0.5 * lim.lane_width ? Lane::kLeft : Lane::kRight;
      const double vmax = lane == Lane::kLeft ? lim.v_max_left : lim.v_max_right;
      r.max_abs_accel = std::max({r.max_abs_accel, std::abs(k.ax), std::abs(k.ay)});
      r.max_abs_jerk = std::max({r.max_abs_jerk, std::abs(k.jx), std::abs(k.jy)});
      if (k.vx < -kTol || k.vx > vmax + kTol || std::abs(k.ax) > lim.a_max + kTol ||
          std::abs(k.ay) > lim.a_max + kTol || std::abs(k.jx) > lim.j_max + kTol ||
          std::abs(k.jy) > lim.j_max + kTol) {
        ++r.bound_violations;
      }
      const bool crossing = k.y > 1e-9 && k.y < lim.lane_width - 1e-9;
      for (Lane l : {Lane::kRight, Lane::kLeft}) {
        if (l != lane && !crossing) continue;
        const auto& leader = w.prediction.leader[lane_index(l)];
        if (!leader) continue;
        const double lead_rear = leader->x0 + leader->v0 * (k.t - leader->t0) - leader->length;
        if (lead_rear - k.x <= gap_time * k.vx - kTol) ++r.gap_violations;
      }
    }
  }
}

}  // namespace detail

/// Warmed-up world for (state, seed); identical for every controller.
inline WarmupResult make_scenario_world(TrafficStateKind state, std::uint64_t seed,
                                        std::shared_ptr<const RoadNetwork> network, const ModelParams& mp) {
  return warmup(state, std::move(network), mp, seed);
}

struct RunOptions {
  bool keep_trace = false;       // subject trace, event log and trajectory CSV
  double max_trip_time = 4000.0;
  double budget_multiple = 0.0;
};

/// Simulates one trip of the subject from x = 0 to the end of the network.
inline RunResult run_scenario(const RunKey& key, const WarmupResult& warm, const ModelParams& mp,
                              const RunOptions& opt = {}) {
  const auto wall0 = std::chrono::steady_clock::now();
  RunResult r;
  r.key = key;
  WorldState world = warm.world;
  const InflowSpec inflow = warm.inflow;
  const BehaviorParams bp = BehaviorParams::from(mp);
  const CostParams cost = CostParams::from(mp, key.vot);
  const PlanLimits limits = PlanLimits::from(mp);
  SubjectController ctl(key.controller, mp, key.vot);
  ctl.attach(world);
  world.event_log.set_enabled(opt.keep_trace);

  const double end = world.network->total_length();
  const VehicleId subject = world.subject_id;

  // Upstream sample fixed at the start of the trip.
  std::vector<VehicleId> upstream;
  for (const auto& v : upstream_sample(world, 15)) upstream.push_back(v.id);
  std::optional<VehicleId> follower_id;
  if (auto f = follower_of(world, subject, world.get(subject).lane)) follower_id = f->id;
  std::vector<std::vector<TraceSample>> traces(upstream.size());
  std::vector<bool> gone(upstream.size(), false);

  std::ostringstream traj;
  auto sample = [&](double t) {
    const auto& s = world.get(subject);
    r.subject_trace.push_back({t, s.v, s.a, ctl.current_beta(world)});
    if (opt.keep_trace) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%.9g,%.9g,%c,%.9g,%.9g,%.9g,%s\n", t, s.x, lane_code(s.lane),
                    s.lateral, s.v, s.a, std::string(to_string(s.membership.kind)).c_str());
      traj << buf;
    }
    for (std::size_t i = 0; i < upstream.size(); ++i) {
      if (gone[i]) continue;
      const auto* v = world.find(upstream[i]);
      if (v == nullptr) {
        gone[i] = true;
        continue;
      }
      traces[i].push_back({t, v->v, v->a,
                           detail::trace_beta(v->membership, mp.beta_free, mp.beta_platoon, mp.beta_transition)});
    }
  };

  if (opt.keep_trace) traj << "t,x,lane,lateral,v,a,membership\n";
  sample(0.0);
  try {
    for (;;) {
      const double t = world.clock();
      if (world.get(subject).x >= end) break;
      if (t > opt.max_trip_time) throw SimulationIntegrityError("trip did not finish in time");
      ctl.cycle(world);
      step(world, bp, ctl.hooks(world), inflow);
      if (!ctl.executed().empty()) {
        const auto& w = ctl.executed().back();
        if (!w.fallback) detail::audit_window(w, limits, mp.sample_dt, r);
      }
      sample(world.clock());
      if (opt.budget_multiple > 0.0 && !ctl.stats().replan_seconds.empty() &&
          ctl.stats().replan_seconds.back() > opt.budget_multiple * mp.t_upd) {
        throw SimulationIntegrityError("replan exceeded wall-time budget");
      }
    }
    r.completed = true;
  } catch (const SimulationIntegrityError& e) {
    r.error = e.what();
    if (std::string(e.what()).find("overlap") != std::string::npos) ++r.overlaps;
  }
  r.trip_time = world.clock();
  r.stats = ctl.stats();
  r.budget_violations = static_cast<int>(std::count_if(r.stats.replan_seconds.begin(), r.stats.replan_seconds.end(),
                                                       [&](double s) { return s > mp.t_upd; }));

  if (r.subject_trace.size() >= 2) r.subject = vehicle_trip_cost(r.subject_trace, cost);
  for (std::size_t i = 0; i < upstream.size(); ++i) {
    if (follower_id && upstream[i] == *follower_id && traces[i].size() >= 2) {
      r.follower = vehicle_trip_cost(traces[i], cost);
    }
    if (traces[i].size() >= 2) ++r.upstream_count;
  }
  r.upstream_mean = upstream_mean_cost(traces, cost);
  r.upstream_mean_fuel = upstream_mean_cost(traces, cost, true);
  if (opt.keep_trace) {
    std::ostringstream ev;
    world.event_log.write(ev);
    r.event_log = ev.str();
    r.trajectory_csv = traj.str();
  }
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  return r;
}

/// Formats a double with 9 significant digits; empty for an absent value.
inline std::string fmt9(std::optional<double> v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", *v);
  return buf;
}

inline std::string vot_label(double vot) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "vot%g", vot);
  return buf;
}

/// Directory name of one (controller, state, VoT) cell.
inline std::string cell_dir(const RunKey& k) {
  return std::string(to_string(k.controller)) + "_" + std::string(to_string(k.state)) + "_" + vot_label(k.vot);
}

inline constexpr std::string_view kResultsHeader =
    "controller,state,vot,seed_index,seed,completed,trip_time,distance,energy,fuel_dollars,time_dollars,"
    "fuel_per_10km,cost_per_10km,follower_fuel_per_10km,follower_cost_per_10km,upstream_fuel_per_10km,"
    "upstream_cost_per_10km,upstream_count,replans,fallbacks,merges,splits,lane_changes,platoon_distance,"
    "audited_samples,gap_violations,bound_violations,max_abs_accel,max_abs_jerk,overlaps,error";

inline void write_result_row(std::ostream& os, const RunResult& r) {
  const auto& k = r.key;
  std::optional<double> ff, fc;
  if (r.follower) {
    ff = r.follower->fuel_per_10km();
    fc = r.follower->per_10km();
  }
  std::string err = r.error;
  std::replace(err.begin(), err.end(), ',', ';');
  os << to_string(k.controller) << ',' << to_string(k.state) << ',' << fmt9(k.vot) << ',' << k.seed_index << ','
     << r.seed << ',' << (r.completed ? 1 : 0) << ',' << fmt9(r.trip_time) << ',' << fmt9(r.subject.distance) << ','
     << fmt9(r.subject.energy) << ',' << fmt9(r.subject.fuel_dollars) << ',' << fmt9(r.subject.time_dollars) << ','
     << fmt9(r.subject.fuel_per_10km()) << ',' << fmt9(r.subject.per_10km()) << ',' << fmt9(ff) << ',' << fmt9(fc)
     << ',' << fmt9(r.upstream_mean_fuel) << ',' << fmt9(r.upstream_mean) << ',' << r.upstream_count << ','
     << r.stats.replans << ',' << r.stats.fallbacks << ',' << r.stats.merges << ',' << r.stats.splits << ','
     << r.stats.lane_changes << ',' << fmt9(r.stats.platoon_distance) << ',' << r.audited_samples << ','
     << r.gap_violations << ',' << r.bound_violations << ',' << fmt9(r.max_abs_accel) << ','
     << fmt9(r.max_abs_jerk) << ',' << r.overlaps << ',' << err << '\n';
}

inline constexpr std::string_view kTimingHeader =
    "controller,state,vot,seed_index,wall_seconds,replans,median_replan_seconds,max_replan_seconds,"
    "budget_violations";

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

inline void write_timing_row(std::ostream& os, const RunResult& r) {
  const auto& rs = r.stats.replan_seconds;
  const double mx = rs.empty() ? 0.0 : *std::max_element(rs.begin(), rs.end());
  os << to_string(r.key.controller) << ',' << to_string(r.key.state) << ',' << fmt9(r.key.vot) << ','
     << r.key.seed_index << ',' << fmt9(r.wall_seconds) << ',' << rs.size() << ',' << fmt9(median(rs)) << ','
     << fmt9(mx) << ',' << r.budget_violations << '\n';
}

enum class Metric : std::uint8_t { kFuel, kCost, kFollowerFuel, kUpstreamFuel };

constexpr std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::kFuel: return "fuel_per_10km";
    case Metric::kCost: return "cost_per_10km";
    case Metric::kFollowerFuel: return "follower_fuel_per_10km";
    case Metric::kUpstreamFuel: return "upstream_fuel_per_10km";
  }
  return "?";
}

inline std::optional<double> metric_of(const RunResult& r, Metric m) {
  switch (m) {
    case Metric::kFuel: return r.subject.fuel_per_10km();
    case Metric::kCost: return r.subject.per_10km();
    case Metric::kFollowerFuel: return r.follower ? r.follower->fuel_per_10km() : std::nullopt;
    case Metric::kUpstreamFuel: return r.upstream_mean_fuel;
  }
  return std::nullopt;
}

/// Per-seed values of one metric for one (controller, state, VoT) cell.
inline SampleSet collect(const std::vector<RunResult>& runs, ControllerKind c, TrafficStateKind s, double vot,
                         Metric m) {
  SampleSet out;
  out.label = std::string(to_string(c)) + "/" + std::string(to_string(s)) + "/" + vot_label(vot);
  for (const auto& r : runs) {
    if (r.key.controller != c || r.key.state != s || r.key.vot != vot || !r.completed) continue;
    if (auto v = metric_of(r, m)) out.values.push_back(*v);
  }
  return out;
}

struct PairwiseTest {
  TrafficStateKind state;
  double vot;
  Metric metric;
  ControllerKind a, b;
  std::size_t n_a = 0, n_b = 0;
  double mean_a = 0.0, mean_b = 0.0;
  TTestResult test;
};

/// Student t-tests between every controller pair per (state, VoT, metric).
inline std::vector<PairwiseTest> pairwise_tests(const std::vector<RunResult>& runs, const ExperimentConfig& cfg) {
  std::vector<PairwiseTest> out;
  for (TrafficStateKind s : cfg.states) {
    for (double vot : cfg.vots) {
      for (Metric m : {Metric::kFuel, Metric::kCost, Metric::kFollowerFuel, Metric::kUpstreamFuel}) {
        for (std::size_t i = 0; i < cfg.controllers.size(); ++i) {
          for (std::size_t j = i + 1; j < cfg.controllers.size(); ++j) {
            const SampleSet a = collect(runs, cfg.controllers[i], s, vot, m);
            const SampleSet b = collect(runs, cfg.controllers[j], s, vot, m);
            if (a.values.size() < 2 || b.values.size() < 2) continue;
            out.push_back({s, vot, m, cfg.controllers[i], cfg.controllers[j], a.values.size(), b.values.size(),
                           a.mean(), b.mean(), t_test_two_tailed(a, b)});
          }
        }
      }
    }
  }
  return out;
}

inline constexpr std::string_view kTTestHeader =
    "state,vot,metric,controller_a,controller_b,n_a,n_b,mean_a,mean_b,t,df,p,significant,degenerate";

inline void write_ttest_row(std::ostream& os, const PairwiseTest& p) {
  os << to_string(p.state) << ',' << fmt9(p.vot) << ',' << to_string(p.metric) << ',' << to_string(p.a) << ','
     << to_string(p.b) << ',' << p.n_a << ',' << p.n_b << ',' << fmt9(p.mean_a) << ',' << fmt9(p.mean_b) << ','
     << fmt9(p.test.t) << ',' << fmt9(p.test.df) << ',' << fmt9(p.test.p) << ',' << (p.test.significant ? 1 : 0)
     << ',' << (p.test.degenerate ? 1 : 0) << '\n';
}

inline void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

/// Trace, event log and cost summary of one run.
inline void write_run_files(const std::filesystem::path& root, const RunResult& r) {
  char seed[32];
  std::snprintf(seed, sizeof seed, "seed%02d", r.key.seed_index);
  const auto dir = root / cell_dir(r.key) / seed;
  std::filesystem::create_directories(dir);
  write_text(dir / "trajectory.csv", r.trajectory_csv);
  write_text(dir / "events.log", r.event_log);
  std::ostringstream trace;
  trace << "t,v,a,beta\n";
  for (const auto& s : r.subject_trace) {
    trace << fmt9(s.t) << ',' << fmt9(s.v) << ',' << fmt9(s.a) << ',' << fmt9(s.beta) << '\n';
  }
  write_text(dir / "trace.csv", trace.str());
  std::ostringstream cost;
  cost << kResultsHeader << '\n';
  write_result_row(cost, r);
  write_text(dir / "cost.csv", cost.str());
}

struct MatrixResult {
  std::vector<RunResult> runs;  // controller-major within each (state, seed)
  std::vector<PairwiseTest> tests;

  [[nodiscard]] bool all_completed() const {
    return std::all_of(runs.begin(), runs.end(), [](const RunResult& r) { return r.completed; });
  }
};

/// Runs every (controller, state, VoT, seed) cell. Each (state, seed) world
/// is warmed up once and shared by all controllers and VoT values. Results
/// are ordered independently of `jobs`.
inline MatrixResult run_matrix(const ExperimentConfig& cfg, std::ostream* progress = nullptr) {
  if (cfg.seeds < 1) throw std::invalid_argument("seeds must be positive");
  auto network = cfg.network ? cfg.network : std::make_shared<const RoadNetwork>(build_reference_network(cfg.params));
  const std::size_t per_world = cfg.controllers.size() * cfg.vots.size();
  const std::size_t n_worlds = cfg.states.size() * static_cast<std::size_t>(cfg.seeds);

  MatrixResult out;
  out.runs.resize(n_worlds * per_world);
  const bool files = !cfg.out_dir.empty() && cfg.write_run_files;
  RunOptions opt;
  opt.keep_trace = files;
  opt.max_trip_time = cfg.max_trip_time;
  opt.budget_multiple = cfg.budget_multiple;

  std::atomic<std::size_t> next{0};
  std::mutex io;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const std::size_t w = next.fetch_add(1);
      if (w >= n_worlds) return;
      try {
        const TrafficStateKind state = cfg.states[w / static_cast<std::size_t>(cfg.seeds)];
        const int index = static_cast<int>(w % static_cast<std::size_t>(cfg.seeds));
        const std::uint64_t seed = scenario_seed(cfg.base_seed, state, index);
        const WarmupResult warm = make_scenario_world(state, seed, network, cfg.params);
        std::size_t slot = w * per_world;
        for (ControllerKind c : cfg.controllers) {
          for (double vot : cfg.vots) {
            RunResult r = run_scenario({c, state, vot, index}, warm, cfg.params, opt);
            r.seed = seed;
            if (files) write_run_files(cfg.out_dir, r);
            r.subject_trace.clear();
            r.subject_trace.shrink_to_fit();
            r.event_log.clear();
            r.trajectory_csv.clear();
            if (progress) {
              std::lock_guard lock(io);
              *progress << to_string(c) << ' ' << to_string(state) << ' ' << vot_label(vot) << " seed " << index
                        << (r.completed ? " done" : " FAILED: " + r.error) << '\n';
            }
            out.runs[slot++] = std::move(r);
          }
        }
      } catch (...) {
        std::lock_guard lock(io);
        if (!failure) failure = std::current_exception();
        next = n_worlds;
        return;
      }
    }
  };
  const int jobs = std::max(1, cfg.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < jobs; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  out.tests = pairwise_tests(out.runs, cfg);
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    std::ostringstream res, tim, tt;
    res << kResultsHeader << '\n';
    tim << kTimingHeader << '\n';
    tt << kTTestHeader << '\n';
    for (const auto& r : out.runs) {
      write_result_row(res, r);
      write_timing_row(tim, r);
    }
    for (const auto& p : out.tests) write_ttest_row(tt, p);
    const std::filesystem::path root(cfg.out_dir);
    write_text(root / "results.csv", res.str());
    write_text(root / "timing.csv", tim.str());
    write_text(root / "ttests.csv", tt.str());
  }
  return out;
}

}  // namespace cavsim
