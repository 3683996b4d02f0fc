// Command line front end: scenario validation, single closed-loop runs, and
// EMPC versus trigger-level demand sweeps with CSV/JSON exports.

#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "wds/scenario_io.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitValidation = 2;
constexpr int kExitInfeasible = 3;

std::filesystem::path resolve_out_dir(const std::string& flag_value) {
  if (const char* env = std::getenv("EMPC_WDS_OUT")) {
    if (*env != '\0') return std::filesystem::path(env);
  }
  return std::filesystem::path(flag_value);
}

void print_issues(const wds::ScenarioError& err) {
  std::cerr << err.what() << "\n";
}

std::string status_string(const wds::RunMetrics& metrics) {
  return metrics.status == wds::RunStatus::kOk ? "ok" : "infeasible";
}

void print_metrics(std::ostream& os, const std::string& label,
                   const wds::RunMetrics& m) {
  os << label << ": status=" << status_string(m)
     << " volume=" << std::fixed << std::setprecision(1) << m.total_volume_m3
     << " m3, energy=" << m.total_energy_kwh
     << " kWh, cost=" << std::setprecision(2) << m.total_cost_pounds
     << " GBP, cost/m3=" << std::setprecision(4) << m.cost_per_m3
     << " GBP, switches=" << m.switch_count
     << ", bound violations=" << m.bound_violation_count << "\n";
  if (m.status != wds::RunStatus::kOk) {
    os << label << ": " << m.status_detail;
    if (m.first_infeasible_hour) {
      os << " (first infeasible hour " << *m.first_infeasible_hour << ")";
    }
    os << "\n";
  }
  os.unsetf(std::ios::fixed);
}

void write_run_outputs(const std::filesystem::path& dir,
                       const wds::RunResult& run) {
  wds::write_text_file(dir / "trace.csv", wds::trace_to_csv(run.trace));
  wds::write_text_file(dir / "trace.jsonl", wds::trace_to_jsonl(run.trace));
  wds::write_text_file(dir / "metrics.json", wds::metrics_to_json(run.metrics));
}

int cmd_simulate(const std::string& scenario_path,
                 const std::string& controller_override,
                 const std::optional<double>& demand_override_ls,
                 const std::filesystem::path& out_dir,
                 const std::optional<std::uint64_t>& seed_override) {
  wds::ScenarioConfig cfg = wds::load_scenario(scenario_path);
  if (controller_override == "empc") {
    cfg.controller = wds::ControllerKind::kEmpc;
  } else if (controller_override == "trigger") {
    cfg.controller = wds::ControllerKind::kTrigger;
  }
  if (cfg.controller == wds::ControllerKind::kTrigger && cfg.trigger_bands.empty()) {
    throw wds::ScenarioError("scenario lacks a controller.trigger section",
                             {{"controller.trigger", "required for trigger runs"}});
  }
  if (demand_override_ls) {
    cfg.model.demand.base_demand_m3s = *demand_override_ls / 1000.0;
  }
  if (seed_override) cfg.seed = *seed_override;

  const wds::RunResult run = wds::run_closed_loop(cfg);
  write_run_outputs(out_dir, run);
  print_metrics(std::cout, cfg.controller == wds::ControllerKind::kEmpc
                               ? "empc"
                               : "trigger",
                run.metrics);
  std::cout << "outputs written to " << out_dir.string() << "\n";
  if (run.metrics.status != wds::RunStatus::kOk) return kExitInfeasible;
  return kExitOk;
}

int cmd_sweep(const std::string& scenario_path,
              const std::vector<double>& demands_ls,
              const std::filesystem::path& out_dir, int jobs,
              const std::optional<std::uint64_t>& seed_override) {
  const wds::ScenarioConfig base = wds::load_scenario(scenario_path);
  if (base.trigger_bands.empty()) {
    throw wds::ScenarioError("scenario lacks a controller.trigger section",
                             {{"controller.trigger", "required for sweeps"}});
  }
  if (demands_ls.empty()) {
    throw wds::ScenarioError("demand list must not be empty",
                             {{"--demand", "at least one value required"}});
  }

  struct Case {
    double demand_ls = 0.0;
    wds::RunResult empc;
    wds::RunResult trigger;
    std::string empc_error;
    std::string trigger_error;
  };
  std::vector<Case> cases(demands_ls.size());
  for (std::size_t i = 0; i < demands_ls.size(); ++i) {
    cases[i].demand_ls = demands_ls[i];
  }

  if (jobs <= 0) {
    jobs = static_cast<int>(std::thread::hardware_concurrency());
    if (jobs <= 0) jobs = 1;
  }
  jobs = std::min<int>(jobs, static_cast<int>(cases.size()));

  std::atomic<std::size_t> next{0};
  const auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cases.size()) return;
      Case& c = cases[i];
      wds::ScenarioConfig cfg = base;
      cfg.model.demand.base_demand_m3s = c.demand_ls / 1000.0;
      if (seed_override) cfg.seed = *seed_override;
      cfg.controller = wds::ControllerKind::kEmpc;
      try {
        c.empc = wds::run_closed_loop(cfg);
      } catch (const std::exception& e) {
        c.empc_error = e.what();
      }
      cfg.controller = wds::ControllerKind::kTrigger;
      try {
        c.trigger = wds::run_closed_loop(cfg);
      } catch (const std::exception& e) {
        c.trigger_error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();

  std::vector<wds::SweepRow> rows;
  for (const Case& c : cases) {
    std::ostringstream dir_name;
    dir_name << "case_d" << c.demand_ls;
    const std::filesystem::path case_dir = out_dir / dir_name.str();
    wds::SweepRow row;
    row.demand_ls = c.demand_ls;
    if (!c.empc_error.empty()) {
      row.empc_status = "error: " + c.empc_error;
    } else {
      row.empc_status = status_string(c.empc.metrics);
      write_run_outputs(case_dir / "empc", c.empc);
    }
    if (!c.trigger_error.empty()) {
      row.trigger_status = "error: " + c.trigger_error;
    } else {
      row.trigger_status = status_string(c.trigger.metrics);
      write_run_outputs(case_dir / "trigger", c.trigger);
    }
    row.report = wds::compare(c.empc.metrics, c.trigger.metrics);
    if (c.empc_error.empty() && c.trigger_error.empty()) {
      wds::write_text_file(case_dir / "comparison.json",
                           wds::comparison_to_json(row.report));
    }
    rows.push_back(std::move(row));
  }
  wds::write_text_file(out_dir / "summary.csv", wds::sweep_summary_to_csv(rows));
  wds::write_text_file(out_dir / "summary.jsonl",
                       wds::sweep_summary_to_jsonl(rows));

  std::cout << "demand_ls  empc_cost  trig_cost  empc_c/m3  trig_c/m3  ratio   status\n";
  for (const wds::SweepRow& row : rows) {
    std::ostringstream line;
    line << std::left << std::setw(10) << row.demand_ls << std::fixed
         << std::setprecision(2) << std::setw(11)
         << row.report.empc.total_cost_pounds << std::setw(11)
         << row.report.trigger.total_cost_pounds << std::setprecision(4)
         << std::setw(11) << row.report.empc.cost_per_m3 << std::setw(11)
         << row.report.trigger.cost_per_m3;
    if (row.report.cost_ratio) {
      line << std::setw(8) << *row.report.cost_ratio;
    } else {
      line << std::setw(8) << "-";
    }
    line << row.empc_status << "/" << row.trigger_status;
    std::cout << line.str() << "\n";
  }
  std::cout << "summary written to " << (out_dir / "summary.csv").string() << "\n";
  return kExitOk;
}

int cmd_validate(const std::string& scenario_path) {
  wds::load_scenario(scenario_path);
  std::cout << "scenario is valid: " << scenario_path << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Economic MPC pump scheduling for water distribution systems"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string controller_override;
  std::string out_flag = "out";
  std::vector<double> demands;
  int jobs = 0;
  std::optional<std::uint64_t> seed;

  CLI::App* simulate = app.add_subcommand("simulate", "Run one closed-loop simulation");
  simulate->add_option("--scenario", scenario_path, "Scenario file")->required();
  simulate->add_option("--controller", controller_override,
                       "Controller override: empc or trigger")
      ->check(CLI::IsMember({"empc", "trigger"}));
  simulate->add_option("--demand", demands,
                       "Base demand override in L/s (single value)");
  simulate->add_option("--out", out_flag, "Output directory");
  simulate->add_option("--seed", seed, "Seed override");

  CLI::App* sweep = app.add_subcommand(
      "sweep", "Run EMPC and trigger control across a demand list");
  sweep->add_option("--scenario", scenario_path, "Scenario file")->required();
  sweep->add_option("--demand", demands, "Base demands in L/s")
      ->delimiter(',');
  sweep->add_option("--out", out_flag, "Output directory");
  sweep->add_option("--jobs", jobs, "Concurrent cases (0 = hardware)");
  sweep->add_option("--seed", seed, "Seed override");

  CLI::App* validate = app.add_subcommand("validate", "Validate a scenario file");
  validate->add_option("--scenario", scenario_path, "Scenario file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (simulate->parsed()) {
      if (demands.size() > 1) {
        std::cerr << "simulate accepts at most one --demand value\n";
        return kExitValidation;
      }
      std::optional<double> demand_override;
      if (!demands.empty()) demand_override = demands[0];
      return cmd_simulate(scenario_path, controller_override, demand_override,
                          resolve_out_dir(out_flag), seed);
    }
    if (sweep->parsed()) {
      if (demands.empty()) demands = {5.0, 15.0, 25.0, 35.0, 45.0, 55.0};
      return cmd_sweep(scenario_path, demands, resolve_out_dir(out_flag), jobs,
                       seed);
    }
    return cmd_validate(scenario_path);
  } catch (const wds::ScenarioError& e) {
    print_issues(e);
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}
