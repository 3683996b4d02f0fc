#include <random>

#include "doctest.h"
#include "test_util.hpp"
#include "wds/trigger_controller.hpp"

using namespace wds;

namespace {

const std::vector<TriggerBand> kBands = wds_test::richmond_trigger_bands();

TriggerState flags(bool a1, bool a2, bool a3) {
  TriggerState s;
  s.on_flags = {a1, a2, a3};
  return s;
}

}  // namespace

TEST_SUITE_BEGIN("trigger_controller");

TEST_CASE("pumps obey their on and off levels") {
  SUBCASE("2A shuts off at or above 3.25") {
    const TriggerDecision d = trigger_step(flags(false, true, false), 3.30, kBands, 2);
    CHECK_FALSE(d.state.on_flags[1]);
    CHECK(d.control == ControlVector{{0, 0}});
  }
  SUBCASE("1A starts at or below 2.37") {
    const TriggerDecision d = trigger_step(flags(false, false, false), 2.30, kBands, 2);
    CHECK(d.state.on_flags[0]);
    CHECK(d.control == ControlVector{{1, 0}});
  }
  SUBCASE("at 2.00 only 1A changes, the rest latch") {
    for (bool a2 : {false, true}) {
      for (bool a3 : {false, true}) {
        const TriggerDecision d = trigger_step(flags(false, a2, a3), 2.00, kBands, 2);
        CHECK(d.state.on_flags[0]);       // 2.00 <= 2.37
        CHECK(d.state.on_flags[1] == a2); // inside (1.40, 3.25)
        CHECK(d.state.on_flags[2] == a3); // inside (1.90, 3.11)
      }
    }
  }
}

TEST_CASE("control aggregates per-station pump counts") {
  const TriggerDecision d = trigger_step(flags(true, true, true), 2.5, kBands, 2);
  CHECK(d.control == ControlVector{{2, 1}});
  const TriggerDecision d2 = trigger_step(flags(true, true, false), 2.5, kBands, 2);
  CHECK(d2.control == ControlVector{{2, 0}});
  const TriggerDecision d3 = trigger_step(flags(false, true, false), 2.5, kBands, 2);
  CHECK(d3.control == ControlVector{{1, 0}});
}

TEST_CASE("the (2,0) combination is reachable and tabulated") {
  const TriggerDecision d = trigger_step(flags(true, true, false), 2.5, kBands, 2);
  REQUIRE(d.control == ControlVector{{2, 0}});
  const PumpStationGroup group = wds_test::richmond_stations();
  CHECK_FALSE(is_admissible(group, d.control));
  CHECK(pump_flow(group, d.control) == doctest::Approx(30.82 / 1000.0));
  CostWeights weights;
  CHECK(pump_power(group, d.control, weights) == doctest::Approx(87.03));
}

TEST_CASE("depths strictly inside every band change nothing") {
  std::mt19937_64 rng(31337);
  std::uniform_real_distribution<double> inside(2.38, 2.97);  // inside all bands
  std::bernoulli_distribution coin;
  for (int i = 0; i < 100; ++i) {
    const TriggerState s = flags(coin(rng), coin(rng), coin(rng));
    const TriggerDecision d = trigger_step(s, inside(rng), kBands, 2);
    CHECK(d.state.on_flags == s.on_flags);
  }
}

TEST_CASE("monotone response in depth") {
  std::mt19937_64 rng(8080);
  std::uniform_real_distribution<double> depth(1.0, 3.6);
  std::bernoulli_distribution coin;
  for (int i = 0; i < 200; ++i) {
    const TriggerState s = flags(coin(rng), coin(rng), coin(rng));
    double x1 = depth(rng);
    double x2 = depth(rng);
    if (x1 > x2) std::swap(x1, x2);
    const TriggerDecision lo = trigger_step(s, x1, kBands, 2);
    const TriggerDecision hi = trigger_step(s, x2, kBands, 2);
    for (std::size_t p = 0; p < kBands.size(); ++p) {
      // Lowering the depth never turns a pump off, raising never turns one on.
      CHECK(lo.state.on_flags[p] >= hi.state.on_flags[p]);
    }
  }
}

TEST_CASE("deterministic transition") {
  const TriggerState s = flags(true, false, true);
  const TriggerDecision a = trigger_step(s, 3.05, kBands, 2);
  const TriggerDecision b = trigger_step(s, 3.05, kBands, 2);
  CHECK(a.state.on_flags == b.state.on_flags);
  CHECK(a.control == b.control);
}

TEST_CASE("one latched flag per band is required") {
  TriggerState s;
  s.on_flags = {true, false};
  CHECK_THROWS_AS(trigger_step(s, 2.0, kBands, 2), std::invalid_argument);
}

TEST_SUITE_END();
