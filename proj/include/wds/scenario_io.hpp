#pragma once

// Scenario file ingestion and result serialization. Scenario files are
// versioned JSON documents with sections for tanks, stations, tariff,
// demand, controller, and simulation; the schema is validated before any
// run and unknown keys are rejected.

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "wds/sim_harness.hpp"

namespace wds {

struct ValidationIssue {
  std::string field;
  std::string message;
};

class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(std::string what, std::vector<ValidationIssue> issues)
      : std::runtime_error(std::move(what)), issues_(std::move(issues)) {}

  const std::vector<ValidationIssue>& issues() const { return issues_; }

 private:
  std::vector<ValidationIssue> issues_;
};

ScenarioConfig parse_scenario(const std::string& text);
ScenarioConfig load_scenario(const std::filesystem::path& path);

// Canonical JSON form; parse(serialize(parse(text))) == parse(text).
std::string serialize_scenario(const ScenarioConfig& cfg);

// Columns: time_s, depth_m, n1, n2, inflow_m3s, demand_m3s, power_kw,
// price_p_per_kwh, energy_kwh, cost_pence. Header always present, '.'
// decimal separator regardless of locale.
std::string trace_to_csv(const SimulationTrace& trace);
std::string trace_to_jsonl(const SimulationTrace& trace);

std::string metrics_to_json(const RunMetrics& metrics);
std::string comparison_to_json(const ComparisonReport& report);

struct SweepRow {
  double demand_ls = 0.0;
  std::string empc_status;
  std::string trigger_status;
  ComparisonReport report;
};

std::string sweep_summary_to_csv(const std::vector<SweepRow>& rows);
std::string sweep_summary_to_jsonl(const std::vector<SweepRow>& rows);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace wds
