#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "doctest.h"
#include "test_util.hpp"
#include "wds/empc_controller.hpp"

using namespace wds;

namespace {

SolveContext make_context(double depth, ControlVector u_prev,
                          std::vector<double> demand_ls,
                          std::vector<double> prices) {
  SolveContext ctx;
  ctx.measured_depth_m = depth;
  ctx.u_prev = std::move(u_prev);
  for (double d : demand_ls) ctx.demand_forecast_m3s.push_back(d / 1000.0);
  ctx.price_forecast_p_per_kwh = std::move(prices);
  return ctx;
}

int count_plan_switches(const Plan& plan, const ControlVector& u_prev) {
  int switches = 0;
  ControlVector prev = u_prev;
  for (const ControlVector& u : plan.controls) {
    if (!(u == prev)) ++switches;
    prev = u;
  }
  return switches;
}

}  // namespace

TEST_SUITE_BEGIN("empc_controller");

TEST_CASE("full tank with zero demand is left alone") {
  NetworkModel model = wds_test::richmond_model(0.0, /*flat_demand=*/true);
  EmpcConfig cfg = wds_test::richmond_empc_config();
  cfg.horizon_steps = 6;
  const SolveContext ctx = make_context(model.tank.depth_max_m, {{0, 0}},
                                        std::vector<double>(6, 0.0),
                                        std::vector<double>(6, 6.79));
  const SolveResult res = solve(ctx, model, cfg);
  REQUIRE(res.feasible());
  CHECK(res.plan->total_cost == 0.0);
  for (const ControlVector& u : res.plan->controls) CHECK(u == ControlVector{{0, 0}});
  CHECK(res.plan->predicted_depths_m.front() == model.tank.depth_max_m);
}

TEST_CASE("pumping lands in the cheap steps of a two-rate horizon") {
  // Four steps priced peak, peak, off-peak, off-peak with flat demand; the
  // enumeration oracle is the ground truth for where pumping may occur.
  NetworkModel model = wds_test::richmond_model(25.0, /*flat_demand=*/true);
  EmpcConfig cfg = wds_test::richmond_empc_config();
  cfg.horizon_steps = 4;
  cfg.integer_prefix_steps = 4;
  const SolveContext ctx =
      make_context(1.9, {{0, 0}}, std::vector<double>(4, 25.0),
                   {6.79, 6.79, 2.41, 2.41});

  const SolveResult oracle = brute_force_oracle(ctx, model, cfg);
  REQUIRE(oracle.feasible());
  CHECK(oracle.plan->controls[0] == ControlVector{{0, 0}});
  CHECK(oracle.plan->controls[1] == ControlVector{{0, 0}});
  CHECK(oracle.plan->controls[2].total() + oracle.plan->controls[3].total() > 0);

  const SolveResult dp = solve(ctx, model, cfg);
  REQUIRE(dp.feasible());
  CHECK(dp.plan->controls == oracle.plan->controls);
  CHECK(dp.plan->total_cost ==
        doctest::Approx(oracle.plan->total_cost)
            .epsilon(1e-12));
}

TEST_CASE("first_action returns the head of the sequence") {
  Plan plan;
  plan.controls = {{{1, 1}}, {{0, 0}}};
  CHECK(first_action(plan) == ControlVector{{1, 1}});
  plan.controls = {{{0, 0}}};
  CHECK(first_action(plan) == ControlVector{{0, 0}});
  CHECK_THROWS_AS(first_action(Plan{}), std::invalid_argument);
}

TEST_CASE("oracle trivial single step") {
  NetworkModel model = wds_test::richmond_model(0.0, true);
  EmpcConfig cfg = wds_test::richmond_empc_config();
  cfg.horizon_steps = 1;
  const SolveContext ctx = make_context(2.4, {{0, 0}}, {0.0}, {6.79});
  const SolveResult res = brute_force_oracle(ctx, model, cfg);
  REQUIRE(res.feasible());
  CHECK(res.plan->controls[0] == ControlVector{{0, 0}});
  CHECK(res.plan->total_cost == 0.0);
}

TEST_CASE("oracle refuses horizons beyond the enumeration limit") {
  NetworkModel model = wds_test::richmond_model(5.0);
  EmpcConfig cfg = wds_test::richmond_empc_config();
  cfg.horizon_steps = 11;
  cfg.integer_prefix_steps = 11;
  SolveContext ctx = make_context(2.4, {{0, 0}}, std::vector<double>(11, 5.0),
                                  std::vector<double>(11, 2.41));
  CHECK_THROWS_WITH_AS(brute_force_oracle(ctx, model, cfg),
                       doctest::Contains("enumeration limit"),
                       std::invalid_argument);
}

TEST_CASE("solver and oracle agree that overload is infeasible") {
  // Flat 60 L/s exceeds the 57.88 L/s capacity; a small tank drains within
  // the horizon no matter the control sequence.
  NetworkModel model = wds_test::richmond_model(60.0, true);
  model.tank.area_m2 = 100.0;
  model.tank.depth_init_m = 1.6;
  EmpcConfig cfg = wds_test::richmond_empc_config();
  cfg.horizon_steps = 8;
  cfg.integer_prefix_steps = 8;
  const SolveContext ctx = make_context(1.6, {{0, 0}}, std::vector<double>(8, 60.0),
                                        std::vector<double>(8, 2.41));
  const SolveResult dp = solve(ctx, model, cfg);
  const SolveResult oracle = brute_force_oracle(ctx, model, cfg);
  CHECK_FALSE(dp.feasible());
  CHECK_FALSE(oracle.feasible());
  REQUIRE(dp.infeasibility.has_value());
  REQUIRE(oracle.infeasibility.has_value());
  CHECK(dp.infeasibility->first_failing_step == oracle.infeasibility->first_failing_step);
  CHECK(dp.infeasibility->detail.find("step") != std::string::npos);
}

TEST_CASE("receding horizon step is deterministic and phase periodic") {
  const NetworkModel model = wds_test::richmond_model(25.0);
  const EmpcConfig cfg = wds_test::richmond_empc_config();
  const ControllerState a{10, 2.5, ControlVector{{1, 0}}};
  const ControllerState b{10, 2.5, ControlVector{{1, 0}}};
  const SolveResult ra = receding_horizon_step(a, model, cfg);
  const SolveResult rb = receding_horizon_step(b, model, cfg);
  REQUIRE(ra.feasible());
  REQUIRE(rb.feasible());
  CHECK(ra.plan->controls == rb.plan->controls);
  CHECK(ra.plan->total_cost == rb.plan->total_cost);

  // Same depth one day later sees identical periodic forecasts.
  const ControllerState c{10 + 24, 2.5, ControlVector{{1, 0}}};
  const SolveResult rc = receding_horizon_step(c, model, cfg);
  REQUIRE(rc.feasible());
  CHECK(rc.plan->controls == ra.plan->controls);
}

TEST_CASE("forecast hook overrides the periodic forecasts") {
  const NetworkModel model = wds_test::richmond_model(25.0);
  EmpcConfig cfg = wds_test::richmond_empc_config();
  cfg.horizon_steps = 4;
  cfg.integer_prefix_steps = 4;
  const ControllerState state{0, 2.5, ControlVector{{0, 0}}};
  bool called = false;
  const ForecastHook hook = [&](long first_step, int horizon,
                                std::vector<double>& demand,
                                std::vector<double>& price) {
    called = true;
    CHECK(first_step == 0);
    CHECK(horizon == 4);
    std::fill(demand.begin(), demand.end(), 0.0);
    std::fill(price.begin(), price.end(), 6.79);
  };
  const SolveResult res = receding_horizon_step(state, model, cfg, hook);
  CHECK(called);
  REQUIRE(res.feasible());
  CHECK(res.plan->total_cost == 0.0);  // zero demand, tank holds
}

TEST_CASE("plans satisfy constraints and the cost decomposition") {
  std::mt19937_64 rng(424242);
  for (int i = 0; i < 60; ++i) {
    const wds_test::RandomInstance inst = wds_test::random_instance(rng);
    const SolveResult res = solve(inst.ctx, inst.model, inst.cfg);
    if (!res.feasible()) continue;
    const Plan& plan = *res.plan;
    REQUIRE(plan.controls.size() == static_cast<std::size_t>(inst.cfg.horizon_steps));
    REQUIRE(plan.predicted_depths_m.size() ==
            static_cast<std::size_t>(inst.cfg.horizon_steps) + 1);
    CHECK(plan.predicted_depths_m[0] == inst.ctx.measured_depth_m);
    for (std::size_t t = 1; t < plan.predicted_depths_m.size(); ++t) {
      CHECK(depth_in_bounds(inst.model.tank, plan.predicted_depths_m[t]));
    }
    for (const ControlVector& u : plan.controls) {
      CHECK(is_admissible(inst.model.stations, u));
    }
    CHECK(plan.total_cost ==
          doctest::Approx(plan.economic_cost + plan.switching_cost).epsilon(1e-12));
    CHECK(plan.economic_cost >= 0.0);
    CHECK(plan.switching_cost >= 0.0);
  }
}

TEST_CASE("solver matches the enumeration oracle on robust instances") {
  std::mt19937_64 rng(20260810);
  int feasible = 0;
  int agreements = 0;
  for (int i = 0; i < 100; ++i) {
    const wds_test::RandomInstance inst = wds_test::robust_random_instance(rng);
    OracleDiagnostics diag;
    const SolveResult oracle = brute_force_oracle(inst.ctx, inst.model, inst.cfg, &diag);
    const SolveResult dp = solve(inst.ctx, inst.model, inst.cfg);
    REQUIRE(dp.feasible() == oracle.feasible());
    if (!dp.feasible()) continue;
    ++feasible;
    const double tol = solver_cost_tolerance(inst.ctx, inst.model, inst.cfg);
    CHECK(std::abs(dp.plan->total_cost - oracle.plan->total_cost) <= tol);
    if (dp.plan->controls == oracle.plan->controls) {
      ++agreements;
    } else {
      // Disagreement is only allowed when the optimum is not unique with
      // margin beyond the quantization tolerance.
      CHECK(diag.second_best_cost - diag.best_cost <= tol);
    }
  }
  REQUIRE(feasible > 0);
  CHECK(static_cast<double>(agreements) >= 0.95 * static_cast<double>(feasible));
}

TEST_CASE("switching penalty trades economic cost for fewer switches") {
  std::mt19937_64 rng(1234);
  const Matrix R = Matrix::diagonal(std::array{100.0, 50.0});
  for (int i = 0; i < 40; ++i) {
    wds_test::RandomInstance inst = wds_test::random_instance(rng);
    EmpcConfig with_R = inst.cfg;
    with_R.weights.switching_R = R;
    EmpcConfig without_R = inst.cfg;
    without_R.weights.switching_R = Matrix::zero(2);

    const SolveResult res_R = solve(inst.ctx, inst.model, with_R);
    const SolveResult res_0 = solve(inst.ctx, inst.model, without_R);
    REQUIRE(res_R.feasible() == res_0.feasible());
    if (!res_R.feasible()) continue;

    // The zero-penalty plan can never cost more economically.
    CHECK(res_0.plan->economic_cost <= res_R.plan->economic_cost + 1e-9);
    // The penalized plan is optimal for the penalized objective, so scoring
    // the zero-penalty plan under R can only be worse or equal.
    double sw_of_plan0 = 0.0;
    ControlVector prev = inst.ctx.u_prev;
    for (const ControlVector& u : res_0.plan->controls) {
      sw_of_plan0 += stage_cost_switching(u, prev, R);
      prev = u;
    }
    CHECK(res_R.plan->total_cost <=
          res_0.plan->economic_cost + sw_of_plan0 + 1e-9);
  }
}

TEST_CASE("scaling all prices by a power of two preserves the argmin") {
  std::mt19937_64 rng(5150);
  for (int i = 0; i < 30; ++i) {
    wds_test::RandomInstance inst = wds_test::random_instance(rng);
    inst.cfg.weights.switching_R = Matrix::zero(2);
    const SolveResult base = solve(inst.ctx, inst.model, inst.cfg);
    for (double scale : {0.25, 4.0}) {
      SolveContext scaled = inst.ctx;
      for (double& p : scaled.price_forecast_p_per_kwh) p *= scale;
      const SolveResult res = solve(scaled, inst.model, inst.cfg);
      REQUIRE(res.feasible() == base.feasible());
      if (base.feasible()) CHECK(res.plan->controls == base.plan->controls);
    }
  }
}

TEST_CASE("relaxed tail emulation stays valid and never costs more") {
  std::mt19937_64 rng(777);
  for (int i = 0; i < 25; ++i) {
    wds_test::RandomInstance inst = wds_test::random_instance(rng, 6);
    if (inst.cfg.horizon_steps < 3) continue;
    EmpcConfig relaxed = inst.cfg;
    relaxed.integer_prefix_steps = 2;
    const SolveResult full = solve(inst.ctx, inst.model, inst.cfg);
    const SolveResult mixed = solve(inst.ctx, inst.model, relaxed);
    if (!full.feasible()) continue;
    REQUIRE(mixed.feasible());
    // The relaxed tail control set contains every integer choice.
    CHECK(mixed.plan->total_cost <= full.plan->total_cost + 1e-9);
    CHECK(mixed.plan->fractional_suffix.size() ==
          static_cast<std::size_t>(inst.cfg.horizon_steps - 2));
    CHECK(is_admissible(inst.model.stations, first_action(*mixed.plan)));
    CHECK(mixed.plan->total_cost ==
          doctest::Approx(mixed.plan->economic_cost + mixed.plan->switching_cost)
              .epsilon(1e-12));
  }
}

TEST_CASE("solve validates its inputs") {
  const NetworkModel model = wds_test::richmond_model(5.0);
  EmpcConfig cfg = wds_test::richmond_empc_config();
  cfg.horizon_steps = 4;
  cfg.integer_prefix_steps = 4;
  SolveContext ctx = make_context(2.5, {{0, 0}}, std::vector<double>(4, 5.0),
                                  std::vector<double>(4, 2.41));

  SUBCASE("forecast length") {
    ctx.demand_forecast_m3s.pop_back();
    CHECK_THROWS_AS(solve(ctx, model, cfg), std::invalid_argument);
  }
  SUBCASE("inadmissible previous control") {
    ctx.u_prev = ControlVector{{2, 0}};
    CHECK_THROWS_AS(solve(ctx, model, cfg), std::invalid_argument);
  }
  SUBCASE("measured depth outside the tolerance band") {
    ctx.measured_depth_m = model.tank.depth_max_m + 1.0;
    CHECK_THROWS_AS(solve(ctx, model, cfg), std::invalid_argument);
  }
  SUBCASE("integer prefix bounds") {
    cfg.integer_prefix_steps = 0;
    CHECK_THROWS_AS(solve(ctx, model, cfg), std::invalid_argument);
    cfg.integer_prefix_steps = 5;
    CHECK_THROWS_AS(solve(ctx, model, cfg), std::invalid_argument);
  }
  SUBCASE("negative demand") {
    ctx.demand_forecast_m3s[1] = -0.001;
    CHECK_THROWS_AS(solve(ctx, model, cfg), std::invalid_argument);
  }
}

TEST_CASE("cost tolerance is positive and scales with the grid") {
  const NetworkModel model = wds_test::richmond_model(25.0);
  EmpcConfig cfg = wds_test::richmond_empc_config();
  cfg.horizon_steps = 8;
  cfg.integer_prefix_steps = 8;
  const SolveContext ctx = make_context(2.5, {{0, 0}}, std::vector<double>(8, 25.0),
                                        std::vector<double>(8, 6.79));
  const double tol = solver_cost_tolerance(ctx, model, cfg);
  CHECK(tol > 0.0);
  EmpcConfig finer = cfg;
  finer.depth_grid_resolution_m = cfg.depth_grid_resolution_m / 2.0;
  CHECK(solver_cost_tolerance(ctx, model, finer) == doctest::Approx(tol / 2.0));
}

TEST_SUITE_END();
