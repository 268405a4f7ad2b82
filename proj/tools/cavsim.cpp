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

// Experiment driver: runs the controller x traffic state x value-of-time
// matrix and writes results.csv, timing.csv, ttests.csv and per-run files.
//
//   cavsim --controllers CF,OC --states onset --vot 0 --seeds 3 --out runs/

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cavsim/experiment.hpp"

namespace {

template <class T, class Parse>
std::vector<T> parse_list(const std::vector<std::string>& names, Parse parse, const char* what) {
  std::vector<T> out;
  for (const auto& n : names) {
    if (n == "all") return {};
    auto v = parse(n);
    if (!v) throw CLI::ValidationError(what, "unknown value '" + n + "'");
    out.push_back(*v);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Connected automated vehicle trajectory planning and platooning experiments"};
  app.set_config("--config", "", "Plain-text KEY = VALUE file mirroring the flags");

  std::vector<std::string> controllers{"all"}, states{"all"}, params;
  std::vector<double> vots{0.0, 20.0};
  int seeds = 25;
  std::uint64_t base_seed = 20190601;
  std::string out_dir = "cavsim_out";
  std::optional<double> grid_step, sample_dt;
  int jobs = 1;
  bool no_run_files = false;
  bool quiet = false;
  double budget_multiple = 0.0;
  bool list_params = false;

  app.add_option("--controllers", controllers, "CF OC OC_M0 OC_M6 OC_L OC_LM0 OC_LM6 or all")->delimiter(',');
  app.add_option("--states", states, "free onset congested or all")->delimiter(',');
  app.add_option("--vot", vots, "Values of time [$/h]")->delimiter(',');
  app.add_option("--seeds", seeds, "Random instances per cell")->check(CLI::PositiveNumber);
  app.add_option("--base-seed", base_seed, "Base seed of the common random numbers");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--param", params, "Model parameter override KEY=VALUE (repeatable)");
  app.add_option("--grid-speed-step", grid_step, "Planner end-speed grid step [m/s]")->check(CLI::PositiveNumber);
  app.add_option("--sample-dt", sample_dt, "Constraint sampling step [s]")->check(CLI::PositiveNumber);
  app.add_option("--jobs", jobs, "Parallel workers")->check(CLI::PositiveNumber);
  app.add_option("--budget-multiple", budget_multiple,
                 "Abort a run when one replan takes longer than this many update periods (0 = off)");
  app.add_flag("--no-run-files", no_run_files, "Only write the summary CSVs");
  app.add_flag("--quiet", quiet, "No per-run progress lines");
  app.add_flag("--list-params", list_params, "Print every model parameter with its default and exit");
  CLI11_PARSE(app, argc, argv);

  cavsim::ExperimentConfig cfg;
  if (list_params) {
    for (const auto& e : cavsim::ModelParams::table()) {
      std::cout << e.name << " = " << cavsim::fmt9(cfg.params.*(e.member)) << '\n';
    }
    return 0;
  }

  try {
    if (auto c = parse_list<cavsim::ControllerKind>(controllers, cavsim::parse_controller, "--controllers");
        !c.empty()) {
      cfg.controllers = c;
    }
    if (auto s = parse_list<cavsim::TrafficStateKind>(states, cavsim::parse_state, "--states"); !s.empty()) {
      cfg.states = s;
    }
    for (const auto& p : params) {
      const auto eq = p.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("--param expects KEY=VALUE, got '" + p + "'");
      cfg.params.set(p.substr(0, eq), std::stod(p.substr(eq + 1)));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  if (grid_step) cfg.params.grid_speed_step = *grid_step;
  if (sample_dt) cfg.params.sample_dt = *sample_dt;
  cfg.vots = vots;
  cfg.seeds = seeds;
  cfg.base_seed = base_seed;
  cfg.out_dir = out_dir;
  cfg.write_run_files = !no_run_files;
  cfg.jobs = jobs;
  cfg.budget_multiple = budget_multiple;

  cavsim::MatrixResult result;
  try {
    result = cavsim::run_matrix(cfg, quiet ? nullptr : &std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  int failed = 0, slow = 0;
  for (const auto& r : result.runs) {
    if (!r.completed) {
      ++failed;
      std::cerr << "integrity failure: " << cavsim::cell_dir(r.key) << " seed " << r.key.seed_index << ": "
                << r.error << '\n';
    }
    slow += r.budget_violations;
  }
  std::cout << result.runs.size() << " runs, " << failed << " failed, " << slow
            << " replans over the update period; results in " << out_dir << '\n';
  return failed == 0 ? 0 : 1;
}
