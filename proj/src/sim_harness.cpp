#include "wds/sim_harness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace wds {

namespace {

void validate_config(const ScenarioConfig& cfg) {
  if (cfg.sim_hours < 24) {
    throw std::invalid_argument("run_closed_loop: sim_hours must be >= 24");
  }
  if (cfg.dt_plant_s <= 0) {
    throw std::invalid_argument("run_closed_loop: dt_plant_s must be positive");
  }
  if (cfg.empc.dt_control_s % cfg.dt_plant_s != 0) {
    throw std::invalid_argument(
        "run_closed_loop: dt_control_s must be an integer multiple of dt_plant_s");
  }
  if (3600 % cfg.empc.dt_control_s != 0) {
    throw std::invalid_argument(
        "run_closed_loop: dt_control_s must divide one hour");
  }
  if (!(cfg.plant_mismatch > 0.0) || !std::isfinite(cfg.plant_mismatch)) {
    throw std::invalid_argument("run_closed_loop: plant_mismatch must be positive");
  }
  if (cfg.controller == ControllerKind::kTrigger && cfg.trigger_bands.empty()) {
    throw std::invalid_argument("run_closed_loop: trigger controller requires bands");
  }
  if (!cfg.trigger_initial_on.empty() &&
      cfg.trigger_initial_on.size() != cfg.trigger_bands.size()) {
    throw std::invalid_argument(
        "run_closed_loop: trigger_initial_on must align with trigger_bands");
  }
}

std::vector<std::string> flattened_pump_names(const PumpStationGroup& group) {
  std::vector<std::string> names;
  for (const auto& station : group.pump_ids) {
    names.insert(names.end(), station.begin(), station.end());
  }
  return names;
}

// Pumps considered running under control u: the last n_j names per station.
std::vector<char> running_mask(const PumpStationGroup& group,
                               const ControlVector& u) {
  std::vector<char> mask;
  for (std::size_t j = 0; j < group.pump_ids.size(); ++j) {
    const std::size_t total = group.pump_ids[j].size();
    const std::size_t on = static_cast<std::size_t>(u.counts[j]);
    for (std::size_t i = 0; i < total; ++i) {
      mask.push_back(i + on >= total ? 1 : 0);
    }
  }
  return mask;
}

}  // namespace

RunResult run_closed_loop(const ScenarioConfig& cfg) {
  validate_config(cfg);
  const NetworkModel& model = cfg.model;
  const double area = model.tank.area_m2;
  const double dt_plant = cfg.dt_plant_s;
  const long total_seconds = static_cast<long>(cfg.sim_hours) * 3600;
  if (total_seconds % cfg.dt_plant_s != 0) {
    throw std::invalid_argument(
        "run_closed_loop: sim_hours must be a whole number of plant substeps");
  }
  const long substeps = total_seconds / cfg.dt_plant_s;
  const long substeps_per_control = cfg.empc.dt_control_s / cfg.dt_plant_s;

  RunResult out;
  out.trace.dt_plant_s = dt_plant;
  out.trace.initial_depth_m = model.tank.depth_init_m;
  RunMetrics& metrics = out.metrics;
  metrics.pump_names = flattened_pump_names(model.stations);
  metrics.avg_pump_efficiency.assign(metrics.pump_names.size(), std::nullopt);

  // EMPC needs the 24-h mean demand to be within the deliverable flow;
  // above that threshold no schedule can sustain the tank indefinitely.
  if (cfg.controller == ControllerKind::kEmpc) {
    const double mean_mult =
        std::accumulate(model.demand.multipliers.begin(),
                        model.demand.multipliers.end(), 0.0) /
        static_cast<double>(model.demand.multipliers.size());
    const double mean_demand = model.demand.base_demand_m3s * mean_mult;
    const double capacity = model.stations.max_flow_admissible().flow_m3s;
    if (mean_demand > capacity) {
      metrics.status = RunStatus::kInfeasible;
      metrics.first_infeasible_hour = 0;
      std::ostringstream os;
      os << "mean demand " << mean_demand * 1000.0
         << " L/s exceeds the maximum deliverable pump flow "
         << capacity * 1000.0 << " L/s";
      metrics.status_detail = os.str();
      return out;
    }
  }

  double depth = model.tank.depth_init_m;
  ControlVector u = cfg.controller == ControllerKind::kEmpc
                        ? cfg.empc.initial_control
                        : ControlVector{};
  TriggerState trig_state;
  if (cfg.controller == ControllerKind::kTrigger) {
    trig_state.on_flags.assign(cfg.trigger_bands.size(), false);
    for (std::size_t i = 0; i < cfg.trigger_initial_on.size(); ++i) {
      trig_state.on_flags[i] = cfg.trigger_initial_on[i];
    }
    u.counts.assign(model.stations.station_count(), 0);
    for (std::size_t i = 0; i < cfg.trigger_bands.size(); ++i) {
      if (trig_state.on_flags[i]) ++u.counts[cfg.trigger_bands[i].station];
    }
  }
  ControlVector u_prev_applied = u;

  const ControlVector fallback{model.stations.max_flow_admissible().counts};

  // Efficiency accumulators per flattened pump.
  std::vector<double> eff_sum(metrics.pump_names.size(), 0.0);
  std::vector<long> eff_count(metrics.pump_names.size(), 0);

  out.trace.records.reserve(static_cast<std::size_t>(substeps));
  for (long step = 0; step < substeps; ++step) {
    const double t0 = static_cast<double>(step) * dt_plant;
    const long hour = step * cfg.dt_plant_s / 3600;

    if (cfg.controller == ControllerKind::kEmpc) {
      if (step % substeps_per_control == 0) {
        // A measurement outside the solver's tolerance band (possible once a
        // failed run is coasting on the fallback control) counts as an
        // infeasible step as well.
        const double band = cfg.empc.depth_grid_resolution_m;
        std::optional<Infeasibility> failure;
        if (depth < model.tank.depth_min_m - band ||
            depth > model.tank.depth_max_m + band) {
          failure = Infeasibility{
              static_cast<int>(t0 / 3600.0),
              "measured depth outside the tank bounds"};
        } else {
          ControllerState state;
          state.step_index = step / substeps_per_control;
          state.depth_m = depth;
          state.u_prev = u_prev_applied;
          const SolveResult res = receding_horizon_step(state, model, cfg.empc);
          if (res.feasible()) {
            u = first_action(*res.plan);
          } else {
            failure = res.infeasibility;
          }
        }
        if (failure) {
          // Keep the trace analyzable: apply the maximum-flow admissible
          // control for this interval and mark the run failed.
          u = fallback;
          if (metrics.status != RunStatus::kInfeasible) {
            metrics.status = RunStatus::kInfeasible;
            metrics.first_infeasible_hour = static_cast<int>(t0 / 3600.0);
            metrics.status_detail = failure->detail;
          }
        }
        if (!(u == u_prev_applied)) ++metrics.switch_count;
        u_prev_applied = u;
      }
    } else {
      const TriggerDecision decision = trigger_step(
          trig_state, depth, cfg.trigger_bands, model.stations.station_count());
      trig_state = decision.state;
      u = decision.control;
      if (!(u == u_prev_applied)) ++metrics.switch_count;
      u_prev_applied = u;
    }

    const PumpComboRecord* combo = model.stations.find_combo(u);
    if (!combo) {
      throw std::logic_error("run_closed_loop: controller produced an untabulated control");
    }
    const double pump_q = combo->flow_m3s;
    const double inflow = pump_q * cfg.plant_mismatch;
    const double demand = demand_at(model.demand, hour);
    const double price = tariff_at(model.tariff, hour);
    const double power = pump_power(model.stations, u, model.weights);

    // Junction nodes have no storage; the pumped flow passes through intact.
    const double residual =
        node_balance_residual(std::array{pump_q}, std::array{pump_q});
    if (std::abs(residual) > 1e-12) {
      throw std::logic_error("run_closed_loop: junction mass balance violated");
    }

    depth = tank_update(depth, inflow, demand, dt_plant, area);

    TraceRecord rec;
    rec.time_s = t0;
    rec.depth_m = depth;
    rec.control = u;
    rec.inflow_m3s = inflow;
    rec.demand_m3s = demand;
    rec.power_kw = power;
    rec.price_p_per_kwh = price;
    rec.energy_kwh = power * dt_plant / 3600.0;
    rec.cost_pence = price * rec.energy_kwh;
    out.trace.records.push_back(rec);

    if (!depth_in_bounds(model.tank, depth)) {
      ++metrics.bound_violation_count;
      if (!metrics.first_violation_time_s) {
        metrics.first_violation_time_s = t0 + dt_plant;
      }
    }

    const std::vector<char> mask = running_mask(model.stations, u);
    std::size_t flat = 0;
    for (std::size_t j = 0; j < model.stations.pump_ids.size(); ++j) {
      for (std::size_t i = 0; i < model.stations.pump_ids[j].size(); ++i, ++flat) {
        if (!mask[flat]) continue;
        if (j < combo->efficiency.size() && combo->efficiency[j].has_value()) {
          eff_sum[flat] += *combo->efficiency[j];
          ++eff_count[flat];
        }
      }
    }
  }

  // Totals and per-day breakdown from the trace. The trailing partial day,
  // if any, is kept as the last entry so the per-day values sum to totals.
  const std::size_t day_count =
      static_cast<std::size_t>((cfg.sim_hours + 23) / 24);
  metrics.per_day.assign(day_count, DayMetrics{});
  double cost_pence_total = 0.0;
  for (const TraceRecord& rec : out.trace.records) {
    const std::size_t day = static_cast<std::size_t>(rec.time_s / 86400.0);
    const double volume = rec.inflow_m3s * dt_plant;
    metrics.total_volume_m3 += volume;
    metrics.total_energy_kwh += rec.energy_kwh;
    cost_pence_total += rec.cost_pence;
    metrics.per_day[day].volume_m3 += volume;
    metrics.per_day[day].energy_kwh += rec.energy_kwh;
    metrics.per_day[day].cost_pounds += rec.cost_pence / 100.0;
  }
  metrics.total_cost_pounds = cost_pence_total / 100.0;
  if (metrics.total_volume_m3 > 0.0) {
    metrics.cost_per_m3 = metrics.total_cost_pounds / metrics.total_volume_m3;
  }
  for (DayMetrics& day : metrics.per_day) {
    if (day.volume_m3 > 0.0) day.cost_per_m3 = day.cost_pounds / day.volume_m3;
  }
  for (std::size_t i = 0; i < metrics.pump_names.size(); ++i) {
    if (eff_count[i] > 0) {
      metrics.avg_pump_efficiency[i] =
          eff_sum[i] / static_cast<double>(eff_count[i]);
    }
  }
  return out;
}

ComparisonReport compare(const RunMetrics& empc_metrics,
                         const RunMetrics& trigger_metrics) {
  ComparisonReport report;
  report.empc = empc_metrics;
  report.trigger = trigger_metrics;
  if (empc_metrics.total_volume_m3 > 0.0 && empc_metrics.cost_per_m3 > 0.0 &&
      trigger_metrics.total_volume_m3 > 0.0) {
    report.cost_ratio = trigger_metrics.cost_per_m3 / empc_metrics.cost_per_m3;
  } else {
    report.note = "cost ratio undefined: EMPC cost per m3 unavailable";
  }
  return report;
}

double trace_recomputation_error(const SimulationTrace& trace,
                                 const RunMetrics& metrics) {
  double volume = 0.0;
  double energy = 0.0;
  double cost_pence = 0.0;
  for (const TraceRecord& rec : trace.records) {
    volume += rec.inflow_m3s * trace.dt_plant_s;
    energy += rec.power_kw * trace.dt_plant_s / 3600.0;
    cost_pence += rec.price_p_per_kwh * rec.power_kw * trace.dt_plant_s / 3600.0;
  }
  const auto rel = [](double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1.0});
    return std::abs(a - b) / scale;
  };
  double err = rel(volume, metrics.total_volume_m3);
  err = std::max(err, rel(energy, metrics.total_energy_kwh));
  err = std::max(err, rel(cost_pence / 100.0, metrics.total_cost_pounds));
  return err;
}

double mass_balance_closure_error(const ScenarioConfig& cfg,
                                  const SimulationTrace& trace) {
  double inflow_volume = 0.0;
  double demand_volume = 0.0;
  for (const TraceRecord& rec : trace.records) {
    inflow_volume += rec.inflow_m3s * trace.dt_plant_s;
    demand_volume += rec.demand_m3s * trace.dt_plant_s;
  }
  const double depth_end = trace.records.empty()
                               ? trace.initial_depth_m
                               : trace.records.back().depth_m;
  const double storage_change =
      cfg.model.tank.area_m2 * (depth_end - trace.initial_depth_m);
  const double scale =
      std::max({std::abs(inflow_volume), std::abs(demand_volume),
                std::abs(storage_change), 1.0});
  return std::abs(inflow_volume - (storage_change + demand_volume)) / scale;
}

}  // namespace wds
