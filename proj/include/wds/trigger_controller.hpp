#pragma once

// Baseline feedback controller: each pump switches on/off by tank-depth
// hysteresis bands, with the on/off flags latched between evaluations.

#include <span>
#include <string>
#include <vector>

#include "wds/network_model.hpp"

namespace wds {

struct TriggerBand {
  std::string pump_id;
  std::size_t station = 0;   // station the pump contributes to
  double on_below_m = 0.0;   // at or below: pump turns on
  double off_above_m = 0.0;  // at or above: pump turns off

  bool operator==(const TriggerBand&) const = default;
};

struct TriggerState {
  std::vector<bool> on_flags;  // aligned with the band list

  bool operator==(const TriggerState&) const = default;
};

struct TriggerDecision {
  TriggerState state;
  ControlVector control;  // per-station counts of pumps that are on
};

// Per pump: on if depth <= on_below, off if depth >= off_above, otherwise the
// previous flag is retained. Depths strictly inside a band change nothing.
TriggerDecision trigger_step(const TriggerState& state, double depth_m,
                             std::span<const TriggerBand> bands,
                             std::size_t station_count);

}  // namespace wds
