#include "wds/trigger_controller.hpp"

#include <stdexcept>

namespace wds {

TriggerDecision trigger_step(const TriggerState& state, double depth_m,
                             std::span<const TriggerBand> bands,
                             std::size_t station_count) {
  if (state.on_flags.size() != bands.size()) {
    throw std::invalid_argument("trigger_step: one latched flag per band required");
  }
  TriggerDecision out;
  out.state.on_flags.resize(bands.size());
  out.control.counts.assign(station_count, 0);
  for (std::size_t i = 0; i < bands.size(); ++i) {
    const TriggerBand& band = bands[i];
    if (band.station >= station_count) {
      throw std::invalid_argument("trigger_step: band references unknown station");
    }
    bool on = state.on_flags[i];
    if (depth_m <= band.on_below_m) on = true;
    if (depth_m >= band.off_above_m) on = false;
    out.state.on_flags[i] = on;
    if (on) ++out.control.counts[band.station];
  }
  return out;
}

}  // namespace wds
