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

#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cavsim {

/// Every tunable model constant in one flat table. Defaults are the values
/// used for the reference experiments; `set` accepts the same key names the
/// CLI exposes through `--param KEY=VALUE`.
struct ModelParams {
  // Timing.
  double t_upd = 0.4;    // subject replanning period [s]
  double tau_s = 0.4;    // surrounding update step / reaction delay [s]
  double horizon = 10.0; // planning horizon [s]

  // Surrounding-vehicle behaviour probabilities (per update epoch).
  double p_on = 0.6;
  double p_off = 0.6;
  double p_npe = 0.5;
  double p_merge = 0.6;
  double p_change = 0.1;

  // Gaps and lane changing.
  double t_p = 3.5;    // free-agent time gap [s]
  double t_g = 0.55;   // platoon time gap [s]
  double t_lcp = 3.6;  // surrounding lane-change duration [s]
  double t_lc = 5.0;   // min interval between neighbouring lane changes [s]
  double d_cg = 50.0;  // critical lane-change gap [m]

  // Lane speeds [m/s].
  double v_m_left = 20.0;
  double v_m_right = 14.0;
  double v_max_left = 30.0;
  double v_max_right = 20.0;

  // Subject comfort limits.
  double a_max = 2.0;
  double j_max = 3.5;

  // Vehicle geometry and IDM.
  double l_car = 5.0;
  double h_st = 5.0;
  double idm_a = 2.0;
  double idm_b = 3.0;
  double idm_delta = 4.0;

  // Fuel model.
  double gamma_ar = 0.3987;
  double gamma_rr = 281.547;
  double gamma_gr = 0.0;
  double gamma_ir = 1750.0;
  double eta_f = 5.98e-8;  // dollars per joule
  double beta_free = 1.0;
  double beta_platoon = 0.9;
  double beta_transition = 0.95;

  // Platoon split scheduling.
  double mu_sch_left = 2.0;
  double sigma_sch_left = 5.0;
  double mu_sch_right = -1.0;
  double sigma_sch_right = 5.0;
  std::array<int, 3> schedule_levels{2, 10, 50};

  // Simulation plumbing.
  double lane_width = 3.6;
  double comm_range = 300.0;      // information range for the progress floor [m]
  double warmup_duration = 120.0; // [s]
  double warmup_noise_sigma = 2.0;
  double lead_in = 4000.0;        // simulated road upstream of the trip origin [m]
  double min_platoon_keep = 6000.0;

  // Planner grid.
  double grid_speed_step = 2.0;
  double sample_dt = 0.1;
  double quadrature_dt = 0.01;
  double feasibility_eps = 1e-6;

  /// Jam density from vehicle length and standstill gap.
  [[nodiscard]] double jam_density() const { return 1.0 / (l_car + h_st); }

  void set(std::string_view key, double value) {
    for (const auto& entry : table()) {
      if (key == entry.name) {
        this->*(entry.member) = value;
        return;
      }
    }
    throw std::invalid_argument("unknown parameter: " + std::string(key));
  }

  [[nodiscard]] double get(std::string_view key) const {
    for (const auto& entry : table()) {
      if (key == entry.name) return this->*(entry.member);
    }
    throw std::invalid_argument("unknown parameter: " + std::string(key));
  }

  struct Entry {
    const char* name;
    double ModelParams::*member;
  };

  static const std::array<Entry, 46>& table();
};

inline const std::array<ModelParams::Entry, 46>& ModelParams::table() {
  static const std::array<Entry, 46> kTable{{
      {"t_upd", &ModelParams::t_upd},
      {"tau_s", &ModelParams::tau_s},
      {"horizon", &ModelParams::horizon},
      {"p_on", &ModelParams::p_on},
      {"p_off", &ModelParams::p_off},
      {"p_npe", &ModelParams::p_npe},
      {"p_merge", &ModelParams::p_merge},
      {"p_change", &ModelParams::p_change},
      {"t_p", &ModelParams::t_p},
      {"t_g", &ModelParams::t_g},
      {"t_lcp", &ModelParams::t_lcp},
      {"t_lc", &ModelParams::t_lc},
      {"d_cg", &ModelParams::d_cg},
      {"v_m_left", &ModelParams::v_m_left},
      {"v_m_right", &ModelParams::v_m_right},
      {"v_max_left", &ModelParams::v_max_left},
      {"v_max_right", &ModelParams::v_max_right},
      {"a_max", &ModelParams::a_max},
      {"j_max", &ModelParams::j_max},
      {"l_car", &ModelParams::l_car},
      {"h_st", &ModelParams::h_st},
      {"idm_a", &ModelParams::idm_a},
      {"idm_b", &ModelParams::idm_b},
      {"idm_delta", &ModelParams::idm_delta},
      {"gamma_ar", &ModelParams::gamma_ar},
      {"gamma_rr", &ModelParams::gamma_rr},
      {"gamma_gr", &ModelParams::gamma_gr},
      {"gamma_ir", &ModelParams::gamma_ir},
      {"eta_f", &ModelParams::eta_f},
      {"beta_free", &ModelParams::beta_free},
      {"beta_platoon", &ModelParams::beta_platoon},
      {"beta_transition", &ModelParams::beta_transition},
      {"mu_sch_left", &ModelParams::mu_sch_left},
      {"sigma_sch_left", &ModelParams::sigma_sch_left},
      {"mu_sch_right", &ModelParams::mu_sch_right},
      {"sigma_sch_right", &ModelParams::sigma_sch_right},
      {"lane_width", &ModelParams::lane_width},
      {"comm_range", &ModelParams::comm_range},
      {"warmup_duration", &ModelParams::warmup_duration},
      {"warmup_noise_sigma", &ModelParams::warmup_noise_sigma},
      {"lead_in", &ModelParams::lead_in},
      {"min_platoon_keep", &ModelParams::min_platoon_keep},
      {"grid_speed_step", &ModelParams::grid_speed_step},
      {"sample_dt", &ModelParams::sample_dt},
      {"quadrature_dt", &ModelParams::quadrature_dt},
      {"feasibility_eps", &ModelParams::feasibility_eps},
  }};
  return kTable;
}

}  // namespace cavsim
