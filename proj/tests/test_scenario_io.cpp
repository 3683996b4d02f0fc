#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "test_util.hpp"
#include "wds/scenario_io.hpp"

using namespace wds;

namespace {

const char* kScenarioPath = WDS_DATA_DIR "/richmond_pruned.scn";

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Returns the concatenated issue fields/messages for substring checks.
std::string issues_of(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const ScenarioError& e) {
    std::string all;
    for (const ValidationIssue& issue : e.issues()) {
      all += issue.field + ": " + issue.message + "\n";
    }
    return all;
  }
  return "";
}

nlohmann::json bundled_json() {
  return nlohmann::json::parse(slurp(kScenarioPath));
}

}  // namespace

TEST_SUITE_BEGIN("scenario_io");

TEST_CASE("the bundled scenario loads and matches the published setup") {
  const ScenarioConfig cfg = load_scenario(kScenarioPath);
  CHECK(cfg.model.tank.area_m2 == 500.0);
  CHECK(cfg.model.tank.depth_min_m == 1.4);
  CHECK(cfg.model.tank.depth_max_m == 3.37);
  CHECK(cfg.model.tank.depth_init_m == 3.12);
  CHECK(cfg.model.stations.combos.size() == 6);
  CHECK(cfg.model.tariff.price_offpeak_p_per_kwh == 2.41);
  CHECK(cfg.model.tariff.price_peak_p_per_kwh == 6.79);
  CHECK(cfg.model.demand.multipliers.size() == 24);
  CHECK(cfg.empc.horizon_steps == 24);
  CHECK(cfg.empc.weights.switching_R(0, 0) == 100.0);
  CHECK(cfg.empc.weights.switching_R(1, 1) == 50.0);
  CHECK(cfg.trigger_bands.size() == 3);
  CHECK(cfg.trigger_initial_on == std::vector<bool>{false, true, false});
  CHECK(cfg.sim_hours == 96);
  CHECK(cfg.dt_plant_s == 300);
}

TEST_CASE("parse, serialize, parse round-trips to the same value") {
  const ScenarioConfig first = load_scenario(kScenarioPath);
  const std::string text = serialize_scenario(first);
  const ScenarioConfig second = parse_scenario(text);
  CHECK(first == second);
  CHECK(serialize_scenario(second) == text);
}

TEST_CASE("negative tank area is rejected with the field name") {
  auto doc = bundled_json();
  doc["tanks"][0]["area_m2"] = -500.0;
  const std::string issues = issues_of(doc.dump());
  CHECK(issues.find("area_m2") != std::string::npos);
}

TEST_CASE("multipliers must average to one") {
  auto doc = bundled_json();
  doc["demand"]["multipliers"] = std::vector<double>(24, 1.1);
  const std::string issues = issues_of(doc.dump());
  CHECK(issues.find("multipliers") != std::string::npos);
  CHECK(issues.find("mean") != std::string::npos);
}

TEST_CASE("the all-zero combination row is required") {
  auto doc = bundled_json();
  auto& combos = doc["stations"]["combos"];
  combos.erase(combos.begin());  // bundled file lists (0,0) first
  const std::string issues = issues_of(doc.dump());
  CHECK(issues.find("all-zero") != std::string::npos);
}

TEST_CASE("every admissible combination needs a row") {
  auto doc = bundled_json();
  auto& combos = doc["stations"]["combos"];
  for (auto it = combos.begin(); it != combos.end(); ++it) {
    if ((*it)["counts"] == nlohmann::json::array({1, 1})) {
      combos.erase(it);
      break;
    }
  }
  const std::string issues = issues_of(doc.dump());
  CHECK(issues.find("admissible") != std::string::npos);
}

TEST_CASE("trigger scenarios need the full combination box") {
  auto doc = bundled_json();
  auto& combos = doc["stations"]["combos"];
  for (auto it = combos.begin(); it != combos.end(); ++it) {
    if ((*it)["counts"] == nlohmann::json::array({2, 0})) {
      combos.erase(it);
      break;
    }
  }
  const std::string issues = issues_of(doc.dump());
  CHECK(issues.find("every pump-count combination") != std::string::npos);
}

TEST_CASE("unknown keys are rejected") {
  auto doc = bundled_json();
  doc["tariff"]["currency"] = "GBP";
  const std::string issues = issues_of(doc.dump());
  CHECK(issues.find("tariff.currency") != std::string::npos);
  CHECK(issues.find("unknown key") != std::string::npos);
}

TEST_CASE("schema violations are collected, not truncated") {
  auto doc = bundled_json();
  doc["tanks"][0]["area_m2"] = -1.0;
  doc["tariff"]["peak_price_p_per_kwh"] = 0.0;
  try {
    parse_scenario(doc.dump());
    FAIL("expected ScenarioError");
  } catch (const ScenarioError& e) {
    CHECK(e.issues().size() >= 2);
  }
}

TEST_CASE("version must be supported") {
  auto doc = bundled_json();
  doc["version"] = 2;
  CHECK(issues_of(doc.dump()).find("version") != std::string::npos);
}

TEST_CASE("duplicate combination rows are rejected") {
  auto doc = bundled_json();
  doc["stations"]["combos"].push_back(doc["stations"]["combos"][1]);
  CHECK(issues_of(doc.dump()).find("duplicate") != std::string::npos);
}

TEST_CASE("bad trigger bands are rejected") {
  auto doc = bundled_json();
  doc["controller"]["trigger"]["bands"][0]["on_below_m"] = 3.5;  // above off level
  CHECK(issues_of(doc.dump()).find("on_below_m") != std::string::npos);

  auto doc2 = bundled_json();
  doc2["controller"]["trigger"]["bands"][0]["pump"] = "9Z";
  CHECK(issues_of(doc2.dump()).find("pump") != std::string::npos);
}

TEST_CASE("inadmissible initial control is rejected") {
  auto doc = bundled_json();
  doc["controller"]["empc"]["initial_control"] = {2, 0};
  CHECK(issues_of(doc.dump()).find("initial_control") != std::string::npos);
}

TEST_CASE("switching weights accept diagonals and full matrices") {
  auto doc = bundled_json();
  doc["controller"]["empc"]["switching_weights"] = {{100.0, 0.0}, {0.0, 50.0}};
  const ScenarioConfig cfg = parse_scenario(doc.dump());
  CHECK(cfg.empc.weights.switching_R == Matrix::diagonal(std::array{100.0, 50.0}));

  auto bad = bundled_json();
  bad["controller"]["empc"]["switching_weights"] = {{100.0, 80.0}, {0.0, 50.0}};
  CHECK(issues_of(bad.dump()).find("symmetric") != std::string::npos);

  auto indef = bundled_json();
  indef["controller"]["empc"]["switching_weights"] = {{1.0, 3.0}, {3.0, 1.0}};
  CHECK(issues_of(indef.dump()).find("semidefinite") != std::string::npos);
}

TEST_CASE("syntax errors report the line") {
  const std::string broken = "{\n  \"version\": 1,\n  oops\n}";
  try {
    parse_scenario(broken);
    FAIL("expected ScenarioError");
  } catch (const ScenarioError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("trace CSV has the fixed header and column order") {
  SimulationTrace trace;
  trace.dt_plant_s = 300.0;
  trace.initial_depth_m = 3.12;
  TraceRecord rec;
  rec.time_s = 300.0;
  rec.depth_m = 3.1;
  rec.control = ControlVector{{2, 1}};
  rec.inflow_m3s = 0.05788;
  rec.demand_m3s = 0.0025;
  rec.power_kw = 120.64;
  rec.price_p_per_kwh = 2.41;
  rec.energy_kwh = 120.64 / 12.0;
  rec.cost_pence = 2.41 * 120.64 / 12.0;
  trace.records.push_back(rec);

  const std::string csv = trace_to_csv(trace);
  CHECK(csv.rfind("time_s,depth_m,n1,n2,inflow_m3s,demand_m3s,power_kw,"
                  "price_p_per_kwh,energy_kwh,cost_pence\n", 0) == 0);
  CHECK(csv.find("300,3.1,2,1,0.05788,0.0025,120.64,2.41,") != std::string::npos);

  const std::string jsonl = trace_to_jsonl(trace);
  const auto row = nlohmann::json::parse(jsonl);
  CHECK(row["n1"] == 2);
  CHECK(row["n2"] == 1);
  CHECK(row["depth_m"] == 3.1);
}

TEST_CASE("sweep summary serializes status and the rounded ratio") {
  SweepRow row;
  row.demand_ls = 5.0;
  row.empc_status = "ok";
  row.trigger_status = "ok";
  row.report.empc.total_volume_m3 = 1000.0;
  row.report.empc.cost_per_m3 = 0.0134;
  row.report.trigger.total_volume_m3 = 1000.0;
  row.report.trigger.cost_per_m3 = 0.0328;
  row.report.cost_ratio = 0.0328 / 0.0134;
  const std::string csv = sweep_summary_to_csv({row});
  CHECK(csv.find("demand_ls,empc_volume_m3,") == 0);
  CHECK(csv.find("2.4478") != std::string::npos);

  const std::string jsonl = sweep_summary_to_jsonl({row});
  const auto parsed = nlohmann::json::parse(jsonl);
  CHECK(parsed["demand_ls"] == 5.0);
  CHECK(parsed["empc_status"] == "ok");
}

TEST_CASE("metrics JSON reports nullable efficiencies and violations") {
  RunMetrics metrics;
  metrics.pump_names = {"1A", "2A", "3A"};
  metrics.avg_pump_efficiency = {std::nullopt, 0.66, std::nullopt};
  metrics.total_volume_m3 = 10.0;
  const auto parsed = nlohmann::json::parse(metrics_to_json(metrics));
  CHECK(parsed["avg_pump_efficiency"]["1A"].is_null());
  CHECK(parsed["avg_pump_efficiency"]["2A"] == 0.66);
  CHECK(parsed["status"] == "ok");
  CHECK(parsed["first_violation_time_s"].is_null());
}

TEST_SUITE_END();
