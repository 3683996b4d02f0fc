#include "wds/empc_controller.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <sstream>

namespace wds {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Bound-check slack for exact arithmetic noise, far below any sensible grid.
constexpr double kBoundEps = 1e-12;
// Interior points per admissible-chain segment for the relaxed tail.
constexpr int kRelaxedLevelsPerSegment = 4;

// One selectable control at a DP stage, possibly fractional.
struct ControlOption {
  std::vector<double> u;
  double flow_m3s = 0.0;
  double power_kw = 0.0;
  ControlVector snapped;  // nearest integer admissible combination
  bool integer = true;
};

std::vector<ControlOption> integer_options(const NetworkModel& model,
                                           const CostWeights& weights) {
  std::vector<ControlOption> out;
  for (const ControlVector& u : model.stations.admissible_controls()) {
    ControlOption opt;
    opt.u.assign(u.counts.begin(), u.counts.end());
    opt.flow_m3s = pump_flow(model.stations, u);
    opt.power_kw = pump_power(model.stations, u, weights);
    opt.snapped = u;
    opt.integer = true;
    out.push_back(std::move(opt));
  }
  return out;
}

bool option_preference_less(const ControlOption& a, const ControlOption& b) {
  const double ta = std::accumulate(a.u.begin(), a.u.end(), 0.0);
  const double tb = std::accumulate(b.u.begin(), b.u.end(), 0.0);
  if (ta != tb) return ta < tb;
  return std::lexicographical_compare(a.u.begin(), a.u.end(), b.u.begin(),
                                      b.u.end());
}

// Discretized interpolation along the admissible combinations ordered by
// flow. Counts, flow, and (table-mode) power interpolate linearly per
// segment; constant-mode power follows the fractional pump total.
std::vector<ControlOption> relaxed_options(const NetworkModel& model,
                                           const CostWeights& weights) {
  std::vector<ControlOption> chain = integer_options(model, weights);
  std::sort(chain.begin(), chain.end(),
            [](const ControlOption& a, const ControlOption& b) {
              return a.flow_m3s < b.flow_m3s;
            });
  std::vector<ControlOption> out = chain;
  for (std::size_t s = 0; s + 1 < chain.size(); ++s) {
    const ControlOption& lo = chain[s];
    const ControlOption& hi = chain[s + 1];
    for (int level = 1; level < kRelaxedLevelsPerSegment; ++level) {
      const double lambda =
          static_cast<double>(level) / kRelaxedLevelsPerSegment;
      ControlOption opt;
      opt.integer = false;
      opt.u.resize(lo.u.size());
      for (std::size_t j = 0; j < lo.u.size(); ++j) {
        opt.u[j] = lo.u[j] + lambda * (hi.u[j] - lo.u[j]);
      }
      opt.flow_m3s = lo.flow_m3s + lambda * (hi.flow_m3s - lo.flow_m3s);
      if (model.stations.power_mode == PowerMode::kPerPumpConstant) {
        opt.power_kw = std::accumulate(opt.u.begin(), opt.u.end(), 0.0) *
                       weights.per_pump_power_kw;
      } else {
        opt.power_kw = lo.power_kw + lambda * (hi.power_kw - lo.power_kw);
      }
      opt.snapped = lambda < 0.5 ? lo.snapped : hi.snapped;
      out.push_back(std::move(opt));
    }
  }
  std::sort(out.begin(), out.end(), option_preference_less);
  return out;
}

// Switching penalties between every (previous, next) option pair.
std::vector<double> switching_table(const std::vector<ControlOption>& prev,
                                    const std::vector<ControlOption>& next,
                                    const Matrix& R) {
  std::vector<double> table(prev.size() * next.size());
  for (std::size_t p = 0; p < prev.size(); ++p) {
    for (std::size_t c = 0; c < next.size(); ++c) {
      table[p * next.size() + c] =
          stage_cost_switching(next[c].u, prev[p].u, R);
    }
  }
  return table;
}

struct Grid {
  double x_min = 0.0;
  double resolution = 0.0;
  long bins = 0;  // grid points x_min + j*resolution, j in [0, bins)

  double center(long j) const { return x_min + static_cast<double>(j) * resolution; }
  long index(double x) const {
    const long j = std::lround((x - x_min) / resolution);
    return std::clamp(j, 0L, bins - 1);
  }
};

void validate_inputs(const SolveContext& ctx, const NetworkModel& model,
                     const EmpcConfig& cfg) {
  const int n = cfg.horizon_steps;
  if (n < 1) throw std::invalid_argument("solve: horizon_steps must be >= 1");
  if (cfg.dt_control_s <= 0) throw std::invalid_argument("solve: dt_control_s must be positive");
  if (!(cfg.depth_grid_resolution_m > 0.0)) {
    throw std::invalid_argument("solve: depth_grid_resolution_m must be positive");
  }
  if (cfg.integer_prefix_steps < 1 || cfg.integer_prefix_steps > n) {
    throw std::invalid_argument("solve: integer_prefix_steps must be in [1, horizon_steps]");
  }
  if (ctx.demand_forecast_m3s.size() != static_cast<std::size_t>(n) ||
      ctx.price_forecast_p_per_kwh.size() != static_cast<std::size_t>(n)) {
    throw std::invalid_argument("solve: forecast lengths must equal horizon_steps");
  }
  for (double d : ctx.demand_forecast_m3s) {
    if (!std::isfinite(d) || d < 0.0) {
      throw std::invalid_argument("solve: demand forecast must be finite and non-negative");
    }
  }
  for (double p : ctx.price_forecast_p_per_kwh) {
    if (!std::isfinite(p) || p < 0.0) {
      throw std::invalid_argument("solve: price forecast must be finite and non-negative");
    }
  }
  if (!is_admissible(model.stations, ctx.u_prev)) {
    throw std::invalid_argument("solve: u_prev is not admissible");
  }
  const TankSpec& tank = model.tank;
  if (!(tank.area_m2 > 0.0) || !(tank.depth_min_m < tank.depth_max_m)) {
    throw std::invalid_argument("solve: invalid tank specification");
  }
  const double eps = cfg.depth_grid_resolution_m;
  if (ctx.measured_depth_m < tank.depth_min_m - eps ||
      ctx.measured_depth_m > tank.depth_max_m + eps) {
    std::ostringstream os;
    os << "solve: measured depth " << ctx.measured_depth_m
       << " outside tolerance band of [" << tank.depth_min_m << ", "
       << tank.depth_max_m << "]";
    throw std::invalid_argument(os.str());
  }
}

Infeasibility diagnose_infeasible(const SolveContext& ctx,
                                  const NetworkModel& model,
                                  const EmpcConfig& cfg, const Grid& grid,
                                  const std::vector<const std::vector<ControlOption>*>& stage_options) {
  const int n = cfg.horizon_steps;
  const double dt_s = cfg.dt_control_s;
  const double area = model.tank.area_m2;
  const double lo = model.tank.depth_min_m - kBoundEps;
  const double hi = model.tank.depth_max_m + kBoundEps;

  std::vector<char> reach(static_cast<std::size_t>(grid.bins), 0);
  // Stage 0 expands from the exact measurement, later stages from grid points.
  bool any = false;
  for (const ControlOption& opt : *stage_options[0]) {
    const double xs = ctx.measured_depth_m +
                      (dt_s / area) * (opt.flow_m3s - ctx.demand_forecast_m3s[0]);
    if (xs < lo || xs > hi) continue;
    reach[static_cast<std::size_t>(grid.index(xs))] = 1;
    any = true;
  }
  int step = 0;
  while (any && step + 1 < n) {
    ++step;
    std::vector<char> nxt(static_cast<std::size_t>(grid.bins), 0);
    any = false;
    for (long j = 0; j < grid.bins; ++j) {
      if (!reach[static_cast<std::size_t>(j)]) continue;
      const double x = grid.center(j);
      for (const ControlOption& opt : *stage_options[static_cast<std::size_t>(step)]) {
        const double xs =
            x + (dt_s / area) * (opt.flow_m3s - ctx.demand_forecast_m3s[static_cast<std::size_t>(step)]);
        if (xs < lo || xs > hi) continue;
        nxt[static_cast<std::size_t>(grid.index(xs))] = 1;
        any = true;
      }
    }
    reach.swap(nxt);
  }
  Infeasibility inf;
  inf.first_failing_step = any ? n - 1 : step;  // "any" false: step failed
  std::ostringstream os;
  os << "no admissible control at step " << inf.first_failing_step
     << " keeps the tank depth within [" << model.tank.depth_min_m << ", "
     << model.tank.depth_max_m << "]";
  inf.detail = os.str();
  return inf;
}

}  // namespace

SolveResult solve(const SolveContext& ctx, const NetworkModel& model,
                  const EmpcConfig& cfg) {
  validate_inputs(ctx, model, cfg);

  const int n = cfg.horizon_steps;
  const int prefix = cfg.integer_prefix_steps;
  const double dt_s = cfg.dt_control_s;
  const double dt_h = dt_s / 3600.0;
  const double area = model.tank.area_m2;
  const double lo = model.tank.depth_min_m - kBoundEps;
  const double hi = model.tank.depth_max_m + kBoundEps;

  Grid grid;
  grid.x_min = model.tank.depth_min_m;
  grid.resolution = cfg.depth_grid_resolution_m;
  grid.bins = static_cast<long>(std::floor(
                  (model.tank.depth_max_m - model.tank.depth_min_m) /
                      grid.resolution +
                  1e-9)) +
              1;

  const std::vector<ControlOption> ints = integer_options(model, cfg.weights);
  if (ints.empty()) throw std::invalid_argument("solve: no admissible controls");
  std::vector<ControlOption> relaxed;
  if (prefix < n) relaxed = relaxed_options(model, cfg.weights);

  std::vector<const std::vector<ControlOption>*> stage_options(
      static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) {
    stage_options[static_cast<std::size_t>(t)] = t < prefix ? &ints : &relaxed;
  }

  const Matrix& weights_R = cfg.weights.switching_R;
  const std::vector<double> sw_int_int = switching_table(ints, ints, weights_R);
  std::vector<double> sw_int_rel, sw_rel_rel;
  if (prefix < n) {
    sw_int_rel = switching_table(ints, relaxed, weights_R);
    sw_rel_rel = switching_table(relaxed, relaxed, weights_R);
  }
  const auto stage_switching =
      [&](int t) -> const std::vector<double>& {
    if (t < prefix) return sw_int_int;          // prev integer, next integer
    if (t == prefix) return sw_int_rel;         // boundary
    return sw_rel_rel;
  };

  const std::size_t bins = static_cast<std::size_t>(grid.bins);

  // Backward value iteration: value[bin][p] is the optimal cost-to-go from
  // the start of stage t when the previous control was option p of stage t-1.
  std::vector<double> value(bins * stage_options[static_cast<std::size_t>(n - 1)]->size(), 0.0);
  // Chosen option per (stage, bin, previous option), for path reconstruction.
  std::vector<std::vector<std::int8_t>> argmin(static_cast<std::size_t>(n));

  std::vector<double> base;     // per (bin, option): stage econ + cost-to-go
  std::vector<std::int8_t> feas;
  for (int t = n - 1; t >= 1; --t) {
    const std::vector<ControlOption>& opts = *stage_options[static_cast<std::size_t>(t)];
    const std::vector<ControlOption>& prev_opts =
        *stage_options[static_cast<std::size_t>(t - 1)];
    const std::vector<double>& sw = stage_switching(t);
    const double demand = ctx.demand_forecast_m3s[static_cast<std::size_t>(t)];
    const double price = ctx.price_forecast_p_per_kwh[static_cast<std::size_t>(t)];
    const std::size_t c_count = opts.size();
    const std::size_t p_count = prev_opts.size();

    base.assign(bins * c_count, kInf);
    feas.assign(bins * c_count, 0);
    for (std::size_t j = 0; j < bins; ++j) {
      const double x = grid.center(static_cast<long>(j));
      for (std::size_t c = 0; c < c_count; ++c) {
        // Conservative quantization: the exact successor from this grid
        // point must respect the bounds for the transition to be feasible.
        const double xs = x + (dt_s / area) * (opts[c].flow_m3s - demand);
        if (xs < lo || xs > hi) continue;
        const std::size_t jn = static_cast<std::size_t>(grid.index(xs));
        const double tail = value[jn * c_count + c];
        if (tail == kInf) continue;
        base[j * c_count + c] = price * opts[c].power_kw * dt_h + tail;
        feas[j * c_count + c] = 1;
      }
    }

    std::vector<double> cur(bins * p_count, kInf);
    std::vector<std::int8_t>& arg = argmin[static_cast<std::size_t>(t)];
    arg.assign(bins * p_count, -1);
    for (std::size_t j = 0; j < bins; ++j) {
      for (std::size_t p = 0; p < p_count; ++p) {
        double best = kInf;
        std::int8_t best_c = -1;
        for (std::size_t c = 0; c < c_count; ++c) {
          if (!feas[j * c_count + c]) continue;
          const double cost = base[j * c_count + c] + sw[p * c_count + c];
          if (cost < best) {  // options are in preference order; strict wins
            best = cost;
            best_c = static_cast<std::int8_t>(c);
          }
        }
        cur[j * p_count + p] = best;
        arg[j * p_count + p] = best_c;
      }
    }
    value.swap(cur);
  }

  // Stage 0 expands from the exact measured depth with the applied u_prev.
  std::vector<double> u_prev_d(ctx.u_prev.counts.begin(), ctx.u_prev.counts.end());
  const std::vector<ControlOption>& first_opts = *stage_options[0];
  double best0 = kInf;
  int best0_c = -1;
  long best0_bin = -1;
  for (std::size_t c = 0; c < first_opts.size(); ++c) {
    const double xs = ctx.measured_depth_m +
                      (dt_s / area) *
                          (first_opts[c].flow_m3s - ctx.demand_forecast_m3s[0]);
    if (xs < lo || xs > hi) continue;
    const long jn = grid.index(xs);
    double cost = ctx.price_forecast_p_per_kwh[0] * first_opts[c].power_kw * dt_h +
                  stage_cost_switching(first_opts[c].u, u_prev_d, weights_R);
    if (n > 1) {
      const double tail =
          value[static_cast<std::size_t>(jn) * first_opts.size() + c];
      if (tail == kInf) continue;
      cost += tail;
    }
    if (cost < best0) {
      best0 = cost;
      best0_c = static_cast<int>(c);
      best0_bin = jn;
    }
  }

  SolveResult result;
  if (best0_c < 0) {
    result.infeasibility =
        diagnose_infeasible(ctx, model, cfg, grid, stage_options);
    return result;
  }

  // Reconstruct the optimal path and its cost decomposition.
  Plan plan;
  plan.controls.reserve(static_cast<std::size_t>(n));
  plan.predicted_depths_m.reserve(static_cast<std::size_t>(n) + 1);
  plan.predicted_depths_m.push_back(ctx.measured_depth_m);

  std::vector<double> prev_u = u_prev_d;
  long bin = best0_bin;
  int choice = best0_c;
  for (int t = 0; t < n; ++t) {
    const std::vector<ControlOption>& opts = *stage_options[static_cast<std::size_t>(t)];
    const ControlOption& opt = opts[static_cast<std::size_t>(choice)];
    plan.economic_cost += ctx.price_forecast_p_per_kwh[static_cast<std::size_t>(t)] *
                          opt.power_kw * dt_h;
    plan.switching_cost += stage_cost_switching(opt.u, prev_u, weights_R);
    plan.controls.push_back(opt.snapped);
    if (t >= prefix) plan.fractional_suffix.push_back(opt.u);
    plan.predicted_depths_m.push_back(grid.center(bin));
    prev_u = opt.u;
    if (t + 1 < n) {
      const std::size_t p_count = opts.size();
      choice = argmin[static_cast<std::size_t>(t + 1)]
                     [static_cast<std::size_t>(bin) * p_count +
                      static_cast<std::size_t>(choice)];
      const std::vector<ControlOption>& next_opts =
          *stage_options[static_cast<std::size_t>(t + 1)];
      const double xs =
          grid.center(bin) +
          (dt_s / area) *
              (next_opts[static_cast<std::size_t>(choice)].flow_m3s -
               ctx.demand_forecast_m3s[static_cast<std::size_t>(t + 1)]);
      bin = grid.index(xs);
    }
  }
  plan.total_cost = plan.economic_cost + plan.switching_cost;
  result.plan = std::move(plan);
  return result;
}

const ControlVector& first_action(const Plan& plan) {
  if (plan.controls.empty()) {
    throw std::invalid_argument("first_action: empty plan");
  }
  return plan.controls.front();
}

SolveResult brute_force_oracle(const SolveContext& ctx, const NetworkModel& model,
                               const EmpcConfig& cfg, OracleDiagnostics* diag) {
  constexpr int kMaxHorizon = 10;
  if (cfg.horizon_steps > kMaxHorizon) {
    std::ostringstream os;
    os << "brute_force_oracle: horizon " << cfg.horizon_steps
       << " exceeds the enumeration limit of " << kMaxHorizon << " steps";
    throw std::invalid_argument(os.str());
  }
  validate_inputs(ctx, model, cfg);

  const int n = cfg.horizon_steps;
  const double dt_s = cfg.dt_control_s;
  const double dt_h = dt_s / 3600.0;
  const double area = model.tank.area_m2;
  const double lo = model.tank.depth_min_m - kBoundEps;
  const double hi = model.tank.depth_max_m + kBoundEps;
  const std::vector<ControlOption> opts = integer_options(model, cfg.weights);
  const Matrix& weights_R = cfg.weights.switching_R;

  double best = kInf;
  double second = kInf;
  std::vector<int> seq(static_cast<std::size_t>(n), -1);
  std::vector<int> best_seq;
  std::vector<double> depths(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> best_depths;
  std::vector<double> econ(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> swc(static_cast<std::size_t>(n) + 1, 0.0);
  double best_econ = 0.0;
  double best_sw = 0.0;
  depths[0] = ctx.measured_depth_m;
  int deepest = 0;

  std::vector<double> u_prev_d(ctx.u_prev.counts.begin(), ctx.u_prev.counts.end());
  // Depth-first enumeration in preference order; the first strictly better
  // complete sequence wins, so equal-cost optima resolve deterministically.
  const std::function<void(int, const std::vector<double>&)> recurse =
      [&](int t, const std::vector<double>& prev_u) {
        if (t == n) {
          const double cost = econ[static_cast<std::size_t>(n)] +
                              swc[static_cast<std::size_t>(n)];
          if (cost < best) {
            second = best;
            best = cost;
            best_seq = seq;
            best_depths = depths;
            best_econ = econ[static_cast<std::size_t>(n)];
            best_sw = swc[static_cast<std::size_t>(n)];
          } else if (cost < second) {
            second = cost;
          }
          return;
        }
        for (std::size_t c = 0; c < opts.size(); ++c) {
          const double xs =
              depths[static_cast<std::size_t>(t)] +
              (dt_s / area) *
                  (opts[c].flow_m3s -
                   ctx.demand_forecast_m3s[static_cast<std::size_t>(t)]);
          if (xs < lo || xs > hi) continue;
          const double e =
              ctx.price_forecast_p_per_kwh[static_cast<std::size_t>(t)] *
              opts[c].power_kw * dt_h;
          const double s = stage_cost_switching(opts[c].u, prev_u, weights_R);
          const double partial = econ[static_cast<std::size_t>(t)] + e +
                                 swc[static_cast<std::size_t>(t)] + s;
          if (partial > second) continue;  // cannot improve best or second
          econ[static_cast<std::size_t>(t) + 1] =
              econ[static_cast<std::size_t>(t)] + e;
          swc[static_cast<std::size_t>(t) + 1] =
              swc[static_cast<std::size_t>(t)] + s;
          depths[static_cast<std::size_t>(t) + 1] = xs;
          seq[static_cast<std::size_t>(t)] = static_cast<int>(c);
          deepest = std::max(deepest, t + 1);
          recurse(t + 1, opts[c].u);
        }
      };
  recurse(0, u_prev_d);

  SolveResult result;
  if (diag) {
    diag->best_cost = best;
    diag->second_best_cost = second;
  }
  if (best_seq.empty() && best == kInf) {
    Infeasibility inf;
    inf.first_failing_step = std::min(deepest, n - 1);
    std::ostringstream os;
    os << "no admissible control at step " << inf.first_failing_step
       << " keeps the tank depth within [" << model.tank.depth_min_m << ", "
       << model.tank.depth_max_m << "]";
    inf.detail = os.str();
    result.infeasibility = inf;
    return result;
  }

  Plan plan;
  for (int t = 0; t < n; ++t) {
    plan.controls.push_back(opts[static_cast<std::size_t>(best_seq[static_cast<std::size_t>(t)])].snapped);
  }
  plan.predicted_depths_m = best_depths;
  plan.economic_cost = best_econ;
  plan.switching_cost = best_sw;
  plan.total_cost = best_econ + best_sw;
  result.plan = std::move(plan);
  return result;
}

SolveResult receding_horizon_step(const ControllerState& state,
                                  const NetworkModel& model,
                                  const EmpcConfig& cfg,
                                  const ForecastHook& hook) {
  const int n = cfg.horizon_steps;
  SolveContext ctx;
  ctx.measured_depth_m = state.depth_m;
  ctx.u_prev = state.u_prev;
  ctx.demand_forecast_m3s.resize(static_cast<std::size_t>(n));
  ctx.price_forecast_p_per_kwh.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const long hour =
        (state.step_index + i) * static_cast<long>(cfg.dt_control_s) / 3600;
    ctx.demand_forecast_m3s[static_cast<std::size_t>(i)] =
        demand_at(model.demand, hour);
    ctx.price_forecast_p_per_kwh[static_cast<std::size_t>(i)] =
        tariff_at(model.tariff, hour);
  }
  if (hook) {
    hook(state.step_index, n, ctx.demand_forecast_m3s,
         ctx.price_forecast_p_per_kwh);
  }
  return solve(ctx, model, cfg);
}

double solver_cost_tolerance(const SolveContext& ctx, const NetworkModel& model,
                             const EmpcConfig& cfg) {
  const std::vector<ControlOption> opts = integer_options(model, cfg.weights);
  double max_switch = 0.0;
  for (const ControlOption& a : opts) {
    for (const ControlOption& b : opts) {
      max_switch = std::max(
          max_switch, stage_cost_switching(a.u, b.u, cfg.weights.switching_R));
    }
  }
  const double dt_h = cfg.dt_control_s / 3600.0;
  double lipschitz = 0.0;
  for (double price : ctx.price_forecast_p_per_kwh) {
    for (const ControlOption& opt : opts) {
      if (opt.flow_m3s <= 0.0) continue;
      const double stage_cost = price * opt.power_kw * dt_h + max_switch;
      const double depth_per_step =
          (cfg.dt_control_s / model.tank.area_m2) * opt.flow_m3s;
      lipschitz = std::max(lipschitz, stage_cost / depth_per_step);
    }
  }
  return lipschitz * cfg.depth_grid_resolution_m * cfg.horizon_steps;
}

}  // namespace wds
