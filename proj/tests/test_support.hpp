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

// Small property-testing kit: a seeded generator and a driver that reports
// the failing case index and seed.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "cavsim/road_network.hpp"
#include "cavsim/world.hpp"

namespace cavsim::testing {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin(double p = 0.5) { return uniform(0.0, 1.0) < p; }
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

/// Runs `body` on `cases` generators derived from `seed`; stops at the first
/// failing case.
inline void for_all(int cases, std::uint64_t seed, const std::function<void(Gen&)>& body) {
  for (int i = 0; i < cases; ++i) {
    Gen g(seed * 1000003ull + static_cast<std::uint64_t>(i));
    SCOPED_TRACE("case " + std::to_string(i) + " of seed " + std::to_string(seed));
    body(g);
    if (::testing::Test::HasFailure()) return;
  }
}

/// Empty world on the reference network with the given subject.
inline WorldState bare_world(const ModelParams& mp = {}) {
  WorldState w;
  w.network = std::make_shared<const RoadNetwork>(build_reference_network(mp));
  w.tau_s = mp.tau_s;
  w.upstream_x = -mp.lead_in;
  return w;
}

inline VehicleState& add_vehicle(WorldState& w, Lane lane, double x, double v, bool platoon_enabled = false) {
  VehicleState s;
  s.id = w.next_id++;
  s.lane = lane;
  s.x = x;
  s.x_prev = x;
  s.v = v;
  s.platoon_enabled = platoon_enabled;
  return w.insert(s);
}

}  // namespace cavsim::testing
