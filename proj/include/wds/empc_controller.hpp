#pragma once

// Finite-horizon economic MPC for pump scheduling. The solver is an exact
// dynamic program over (time step, quantized tank depth, previous control);
// the admissible control set is small and the tank state is scalar, so the
// DP is exact up to the depth grid resolution. A brute-force enumeration
// oracle with exact depth propagation is provided for verification.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wds/network_model.hpp"

namespace wds {

struct EmpcConfig {
  int horizon_steps = 24;
  int dt_control_s = 3600;
  double depth_grid_resolution_m = 0.005;
  // Leading steps solved over the integer admissible set. Steps beyond the
  // prefix use a discretized interpolation along the admissible flow chain,
  // emulating a continuous relaxation of the tail decision variables.
  int integer_prefix_steps = 24;
  CostWeights weights;
  // Control assumed applied before the first step (for the switching term).
  ControlVector initial_control;

  bool operator==(const EmpcConfig&) const = default;
};

struct SolveContext {
  double measured_depth_m = 0.0;
  ControlVector u_prev;
  std::vector<double> demand_forecast_m3s;      // length horizon_steps
  std::vector<double> price_forecast_p_per_kwh; // length horizon_steps
};

struct Plan {
  // Applied/nominal control per step. For steps beyond the integer prefix
  // this is the nearest integer combination; the exact fractional choices
  // are kept in fractional_suffix.
  std::vector<ControlVector> controls;
  std::vector<std::vector<double>> fractional_suffix;
  // predicted_depths_m[0] is the fed-back measurement; later entries are the
  // solver's quantized state trajectory (exact for the oracle).
  std::vector<double> predicted_depths_m;
  double total_cost = 0.0;      // economic_cost + switching_cost
  double economic_cost = 0.0;   // pence
  double switching_cost = 0.0;  // dimensionless penalty
};

struct Infeasibility {
  int first_failing_step = 0;
  std::string detail;
};

struct SolveResult {
  std::optional<Plan> plan;
  std::optional<Infeasibility> infeasibility;

  bool feasible() const { return plan.has_value(); }
};

SolveResult solve(const SolveContext& ctx, const NetworkModel& model,
                  const EmpcConfig& cfg);

// First element of the optimal control sequence; throws on an empty plan.
const ControlVector& first_action(const Plan& plan);

struct OracleDiagnostics {
  double best_cost = 0.0;
  // Cost of the best complete feasible sequence other than the optimum
  // (equals best_cost when the optimum is not unique); +inf if none.
  double second_best_cost = 0.0;
};

// Exhaustive enumeration over the integer admissible set with exact depth
// propagation. Ground truth for solver tests; refuses horizons above 10.
SolveResult brute_force_oracle(const SolveContext& ctx, const NetworkModel& model,
                               const EmpcConfig& cfg,
                               OracleDiagnostics* diag = nullptr);

struct ControllerState {
  long step_index = 0;  // control steps since simulation start
  double depth_m = 0.0;
  ControlVector u_prev;
};

// Optional override for the internally generated periodic forecasts.
using ForecastHook =
    std::function<void(long first_step, int horizon,
                       std::vector<double>& demand_m3s,
                       std::vector<double>& price_p_per_kwh)>;

// Composes the solve context for the current step (perfect periodic
// forecasts unless a hook is given) and solves. The action to apply is
// first_action of the returned plan.
SolveResult receding_horizon_step(const ControllerState& state,
                                  const NetworkModel& model,
                                  const EmpcConfig& cfg,
                                  const ForecastHook& hook = {});

// Quantization cost tolerance L*delta*N used when comparing the DP solution
// against the oracle: L is the per-step cost Lipschitz constant with respect
// to depth, max over steps and pumping controls of (economic stage cost plus
// the largest switching penalty) divided by the depth gained per step.
double solver_cost_tolerance(const SolveContext& ctx, const NetworkModel& model,
                             const EmpcConfig& cfg);

}  // namespace wds
