#pragma once

// Flow-based water distribution model: tank mass balance, pump station
// combination tables, time-of-use tariff, demand profile, and the stage
// costs shared by the controllers. All types are immutable value typesable
// to be shared freely across threads; all operations are pure.

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wds {

// Integer pump counts per station, u = [n_1, ..., n_Ps].
struct ControlVector {
  std::vector<int> counts;

  int total() const;
  bool operator==(const ControlVector&) const = default;
};

// Preference order used wherever cost ties are broken: fewer total pumps,
// then lexicographically smaller counts (lower n_1, then lower n_2, ...).
bool control_preference_less(const ControlVector& a, const ControlVector& b);

struct TankSpec {
  std::string id;
  double area_m2 = 0.0;       // plan area
  double depth_min_m = 0.0;   // operational lower bound
  double depth_max_m = 0.0;   // capacity upper bound
  double depth_init_m = 0.0;

  bool operator==(const TankSpec&) const = default;
};

// One row of the pump combination table: counts per station mapped to the
// delivered flow and electrical power. Head and efficiency are carried for
// reporting only and never enter the dynamics.
struct PumpComboRecord {
  std::vector<int> counts;
  double flow_m3s = 0.0;
  std::vector<double> station_power_kw;
  std::vector<std::optional<double>> head_m;
  std::vector<std::optional<double>> efficiency;

  double total_power_kw() const;
  bool operator==(const PumpComboRecord&) const = default;
};

enum class PowerMode { kTable, kPerPumpConstant };

// kChain couples two stations as n_1 >= n_2 and n_1 - n_2 <= 1, which
// excludes (2,0) from the admissible set.
enum class StationCoupling { kNone, kChain };

struct PumpStationGroup {
  std::vector<std::string> station_ids;
  // Pump names per station; when n_j < max_counts[j], the last n_j names
  // in the list are considered running (used for efficiency reporting).
  std::vector<std::vector<std::string>> pump_ids;
  std::vector<int> max_counts;
  StationCoupling coupling = StationCoupling::kNone;
  PowerMode power_mode = PowerMode::kTable;
  std::vector<PumpComboRecord> combos;

  std::size_t station_count() const { return max_counts.size(); }
  const PumpComboRecord* find_combo(const ControlVector& u) const;
  // All is_admissible vectors in preference order.
  std::vector<ControlVector> admissible_controls() const;
  const PumpComboRecord& max_flow_admissible() const;

  bool operator==(const PumpStationGroup&) const = default;
};

// Two-rate time-of-use tariff, 24-h periodic. The off-peak window is the
// half-open hour interval [start, end) of each day.
struct TariffSchedule {
  double price_offpeak_p_per_kwh = 0.0;
  double price_peak_p_per_kwh = 0.0;
  int offpeak_start_hour = 0;
  int offpeak_end_hour = 0;

  bool operator==(const TariffSchedule&) const = default;
};

// Base demand scaled by 24 hourly multipliers with mean 1.0, repeated daily.
struct DemandProfile {
  double base_demand_m3s = 0.0;
  std::vector<double> multipliers;

  bool operator==(const DemandProfile&) const = default;
};

// Small dense square matrix, row-major. Sized for switching-penalty weights
// (a handful of stations), not for linear algebra workloads.
struct Matrix {
  std::size_t n = 0;
  std::vector<double> a;

  static Matrix zero(std::size_t n);
  static Matrix diagonal(std::span<const double> d);

  double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }
  double& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }

  bool operator==(const Matrix&) const = default;
};

bool is_symmetric(const Matrix& m, double tol = 0.0);
// Smallest eigenvalue of a symmetric matrix (cyclic Jacobi).
double min_eigenvalue_symmetric(Matrix m);
double quadratic_form(const Matrix& m, std::span<const double> v);

struct CostWeights {
  Matrix switching_R;            // symmetric positive (semi)definite
  double per_pump_power_kw = 0.0; // used only in kPerPumpConstant mode

  bool operator==(const CostWeights&) const = default;
};

struct NetworkModel {
  TankSpec tank;
  PumpStationGroup stations;
  TariffSchedule tariff;
  DemandProfile demand;
  CostWeights weights;

  bool operator==(const NetworkModel&) const = default;
};

// Thrown when a control is not present in the combination table.
class InadmissibleControlError : public std::invalid_argument {
 public:
  explicit InadmissibleControlError(const std::string& what)
      : std::invalid_argument(what) {}
};

// Mass balance over one step: x + (dt/area) * (q_in - q_out), no clamping.
// Bound checking is a separate concern (see depth_in_bounds).
double tank_update(double depth_m, double q_in_m3s, double q_out_m3s,
                   double dt_s, double area_m2);

// Exact lookup of the combination's delivered flow.
double pump_flow(const PumpStationGroup& group, const ControlVector& u);

// Table mode: total tabulated power. Constant mode: (sum of counts) * p.
double pump_power(const PumpStationGroup& group, const ControlVector& u,
                  const CostWeights& weights);

// price [p/kWh] * power [kW] * dt [h], in pence.
double stage_cost_economic(const ControlVector& u, double price_p_per_kwh,
                           double dt_h, const PumpStationGroup& group,
                           const CostWeights& weights);

// (u - u_prev)' R (u - u_prev), dimensionless penalty.
double stage_cost_switching(const ControlVector& u, const ControlVector& u_prev,
                            const Matrix& R);
double stage_cost_switching(std::span<const double> u,
                            std::span<const double> u_prev, const Matrix& R);

double tariff_at(const TariffSchedule& schedule, long hour);
double demand_at(const DemandProfile& profile, long hour);

// Box bounds plus the chain coupling when configured.
bool is_admissible(const PumpStationGroup& group, const ControlVector& u);

// Inclusive on both bounds.
bool depth_in_bounds(const TankSpec& tank, double depth_m);

// Sum of inflows minus sum of outflows at a junction node.
double node_balance_residual(std::span<const double> inflows,
                             std::span<const double> outflows);

}  // namespace wds
