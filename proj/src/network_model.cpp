#include "wds/network_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace wds {

namespace {

std::string counts_to_string(std::span<const int> counts) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (i) os << ',';
    os << counts[i];
  }
  os << ')';
  return os.str();
}

}  // namespace

int ControlVector::total() const {
  return std::accumulate(counts.begin(), counts.end(), 0);
}

bool control_preference_less(const ControlVector& a, const ControlVector& b) {
  const int ta = a.total();
  const int tb = b.total();
  if (ta != tb) return ta < tb;
  return std::lexicographical_compare(a.counts.begin(), a.counts.end(),
                                      b.counts.begin(), b.counts.end());
}

double PumpComboRecord::total_power_kw() const {
  return std::accumulate(station_power_kw.begin(), station_power_kw.end(), 0.0);
}

const PumpComboRecord* PumpStationGroup::find_combo(const ControlVector& u) const {
  for (const auto& combo : combos) {
    if (combo.counts == u.counts) return &combo;
  }
  return nullptr;
}

std::vector<ControlVector> PumpStationGroup::admissible_controls() const {
  std::vector<ControlVector> out;
  ControlVector u;
  u.counts.assign(station_count(), 0);
  // Enumerate the box, then filter.
  while (true) {
    if (is_admissible(*this, u)) out.push_back(u);
    std::size_t j = 0;
    for (; j < u.counts.size(); ++j) {
      if (u.counts[j] < max_counts[j]) {
        ++u.counts[j];
        std::fill(u.counts.begin(), u.counts.begin() + static_cast<long>(j), 0);
        break;
      }
    }
    if (j == u.counts.size()) break;
  }
  std::sort(out.begin(), out.end(), control_preference_less);
  return out;
}

const PumpComboRecord& PumpStationGroup::max_flow_admissible() const {
  const PumpComboRecord* best = nullptr;
  for (const auto& combo : combos) {
    if (!is_admissible(*this, ControlVector{combo.counts})) continue;
    if (!best || combo.flow_m3s > best->flow_m3s) best = &combo;
  }
  if (!best) throw std::logic_error("pump station group has no admissible combination");
  return *best;
}

Matrix Matrix::zero(std::size_t n) {
  Matrix m;
  m.n = n;
  m.a.assign(n * n, 0.0);
  return m;
}

Matrix Matrix::diagonal(std::span<const double> d) {
  Matrix m = zero(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

bool is_symmetric(const Matrix& m, double tol) {
  for (std::size_t i = 0; i < m.n; ++i) {
    for (std::size_t j = i + 1; j < m.n; ++j) {
      if (std::abs(m(i, j) - m(j, i)) > tol) return false;
    }
  }
  return true;
}

double min_eigenvalue_symmetric(Matrix m) {
  if (m.n == 0) return 0.0;
  // Cyclic Jacobi sweeps; plenty for the small matrices used here.
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < m.n; ++p)
      for (std::size_t q = p + 1; q < m.n; ++q) off += m(p, q) * m(p, q);
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < m.n; ++p) {
      for (std::size_t q = p + 1; q < m.n; ++q) {
        const double apq = m(p, q);
        if (apq == 0.0) continue;
        const double theta = (m(q, q) - m(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < m.n; ++k) {
          const double akp = m(k, p);
          const double akq = m(k, q);
          m(k, p) = c * akp - s * akq;
          m(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < m.n; ++k) {
          const double apk = m(p, k);
          const double aqk = m(q, k);
          m(p, k) = c * apk - s * aqk;
          m(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  double lo = m(0, 0);
  for (std::size_t i = 1; i < m.n; ++i) lo = std::min(lo, m(i, i));
  return lo;
}

double quadratic_form(const Matrix& m, std::span<const double> v) {
  if (v.size() != m.n) {
    throw std::invalid_argument("quadratic_form: dimension mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < m.n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < m.n; ++j) row += m(i, j) * v[j];
    acc += v[i] * row;
  }
  return acc;
}

double tank_update(double depth_m, double q_in_m3s, double q_out_m3s,
                   double dt_s, double area_m2) {
  if (!std::isfinite(depth_m) || !std::isfinite(q_in_m3s) ||
      !std::isfinite(q_out_m3s) || !std::isfinite(dt_s) ||
      !std::isfinite(area_m2)) {
    throw std::invalid_argument("tank_update: non-finite input");
  }
  if (area_m2 <= 0.0) throw std::invalid_argument("tank_update: area must be positive");
  if (dt_s <= 0.0) throw std::invalid_argument("tank_update: dt must be positive");
  if (q_in_m3s < 0.0 || q_out_m3s < 0.0) {
    throw std::invalid_argument("tank_update: flows must be non-negative");
  }
  return depth_m + (dt_s / area_m2) * (q_in_m3s - q_out_m3s);
}

double pump_flow(const PumpStationGroup& group, const ControlVector& u) {
  const PumpComboRecord* combo = group.find_combo(u);
  if (!combo) {
    throw InadmissibleControlError("pump_flow: control " +
                                   counts_to_string(u.counts) +
                                   " is not in the combination table");
  }
  return combo->flow_m3s;
}

double pump_power(const PumpStationGroup& group, const ControlVector& u,
                  const CostWeights& weights) {
  const PumpComboRecord* combo = group.find_combo(u);
  if (!combo) {
    throw InadmissibleControlError("pump_power: control " +
                                   counts_to_string(u.counts) +
                                   " is not in the combination table");
  }
  if (group.power_mode == PowerMode::kPerPumpConstant) {
    return static_cast<double>(u.total()) * weights.per_pump_power_kw;
  }
  return combo->total_power_kw();
}

double stage_cost_economic(const ControlVector& u, double price_p_per_kwh,
                           double dt_h, const PumpStationGroup& group,
                           const CostWeights& weights) {
  if (dt_h <= 0.0) throw std::invalid_argument("stage_cost_economic: dt must be positive");
  return price_p_per_kwh * pump_power(group, u, weights) * dt_h;
}

double stage_cost_switching(const ControlVector& u, const ControlVector& u_prev,
                            const Matrix& R) {
  if (u.counts.size() != u_prev.counts.size() || u.counts.size() != R.n) {
    throw std::invalid_argument("stage_cost_switching: dimension mismatch");
  }
  std::vector<double> delta(u.counts.size());
  for (std::size_t i = 0; i < delta.size(); ++i) {
    delta[i] = static_cast<double>(u.counts[i] - u_prev.counts[i]);
  }
  return quadratic_form(R, delta);
}

double stage_cost_switching(std::span<const double> u,
                            std::span<const double> u_prev, const Matrix& R) {
  if (u.size() != u_prev.size() || u.size() != R.n) {
    throw std::invalid_argument("stage_cost_switching: dimension mismatch");
  }
  std::vector<double> delta(u.size());
  for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = u[i] - u_prev[i];
  return quadratic_form(R, delta);
}

double tariff_at(const TariffSchedule& schedule, long hour) {
  const long h = ((hour % 24) + 24) % 24;
  const bool offpeak =
      h >= schedule.offpeak_start_hour && h < schedule.offpeak_end_hour;
  return offpeak ? schedule.price_offpeak_p_per_kwh
                 : schedule.price_peak_p_per_kwh;
}

double demand_at(const DemandProfile& profile, long hour) {
  const long h = ((hour % 24) + 24) % 24;
  return profile.base_demand_m3s * profile.multipliers[static_cast<std::size_t>(h)];
}

bool is_admissible(const PumpStationGroup& group, const ControlVector& u) {
  if (u.counts.size() != group.station_count()) return false;
  for (std::size_t j = 0; j < u.counts.size(); ++j) {
    if (u.counts[j] < 0 || u.counts[j] > group.max_counts[j]) return false;
  }
  if (group.coupling == StationCoupling::kChain) {
    const int n1 = u.counts[0];
    const int n2 = u.counts[1];
    if (n1 < n2) return false;
    if (n1 - n2 > 1) return false;
  }
  return true;
}

bool depth_in_bounds(const TankSpec& tank, double depth_m) {
  return depth_m >= tank.depth_min_m && depth_m <= tank.depth_max_m;
}

double node_balance_residual(std::span<const double> inflows,
                             std::span<const double> outflows) {
  double in = 0.0;
  for (double q : inflows) in += q;
  double out = 0.0;
  for (double q : outflows) out += q;
  return in - out;
}

}  // namespace wds
