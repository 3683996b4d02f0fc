#include "wds/scenario_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace wds {

namespace {

using json = nlohmann::ordered_json;

std::string fmt_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt_fixed(double v, int precision) {
  char buf[40];
  const auto res =
      std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, precision);
  return std::string(buf, res.ptr);
}

struct Checker {
  std::vector<ValidationIssue> issues;

  void add(const std::string& field, const std::string& message) {
    issues.push_back({field, message});
  }

  void throw_if_failed(const std::string& what) const {
    if (!issues.empty()) {
      std::ostringstream os;
      os << what << ": " << issues.size() << " issue(s)";
      for (const ValidationIssue& issue : issues) {
        os << "\n  " << issue.field << ": " << issue.message;
      }
      throw ScenarioError(os.str(), issues);
    }
  }

  bool reject_unknown_keys(const json& obj, const std::string& path,
                           std::initializer_list<const char*> allowed) {
    bool clean = true;
    for (const auto& item : obj.items()) {
      const bool known =
          std::any_of(allowed.begin(), allowed.end(), [&](const char* key) {
            return item.key() == key;
          });
      if (!known) {
        add(path + "." + item.key(), "unknown key");
        clean = false;
      }
    }
    return clean;
  }

  const json* required(const json& obj, const std::string& path,
                       const char* key) {
    if (!obj.contains(key)) {
      add(path + "." + key, "missing required key");
      return nullptr;
    }
    return &obj.at(key);
  }

  bool number(const json& v, const std::string& path, double& out) {
    if (!v.is_number()) {
      add(path, "expected a number");
      return false;
    }
    out = v.get<double>();
    if (!std::isfinite(out)) {
      add(path, "must be finite");
      return false;
    }
    return true;
  }

  bool integer(const json& v, const std::string& path, long& out) {
    if (!v.is_number_integer() && !v.is_number_unsigned()) {
      add(path, "expected an integer");
      return false;
    }
    out = v.get<long>();
    return true;
  }

  bool text(const json& v, const std::string& path, std::string& out) {
    if (!v.is_string()) {
      add(path, "expected a string");
      return false;
    }
    out = v.get<std::string>();
    return true;
  }
};

bool get_number_field(Checker& ck, const json& obj, const std::string& path,
                      const char* key, double& out) {
  const json* v = ck.required(obj, path, key);
  return v && ck.number(*v, path + "." + key, out);
}

bool get_integer_field(Checker& ck, const json& obj, const std::string& path,
                       const char* key, long& out) {
  const json* v = ck.required(obj, path, key);
  return v && ck.integer(*v, path + "." + key, out);
}

void parse_tank(Checker& ck, const json& root, TankSpec& tank) {
  const json* tanks = ck.required(root, "scenario", "tanks");
  if (!tanks) return;
  if (!tanks->is_array() || tanks->size() != 1) {
    ck.add("tanks", "expected an array with exactly one tank");
    return;
  }
  const json& t = (*tanks)[0];
  const std::string path = "tanks[0]";
  if (!t.is_object()) {
    ck.add(path, "expected an object");
    return;
  }
  ck.reject_unknown_keys(t, path,
                         {"id", "area_m2", "depth_min_m", "depth_max_m", "depth_init_m"});
  if (const json* v = ck.required(t, path, "id")) ck.text(*v, path + ".id", tank.id);
  get_number_field(ck, t, path, "area_m2", tank.area_m2);
  get_number_field(ck, t, path, "depth_min_m", tank.depth_min_m);
  get_number_field(ck, t, path, "depth_max_m", tank.depth_max_m);
  get_number_field(ck, t, path, "depth_init_m", tank.depth_init_m);
  if (!(tank.area_m2 > 0.0)) ck.add(path + ".area_m2", "must be positive");
  if (tank.depth_min_m < 0.0) ck.add(path + ".depth_min_m", "must be non-negative");
  if (!(tank.depth_min_m < tank.depth_max_m)) {
    ck.add(path + ".depth_max_m", "must exceed depth_min_m");
  }
  if (tank.depth_init_m < tank.depth_min_m || tank.depth_init_m > tank.depth_max_m) {
    ck.add(path + ".depth_init_m", "must lie within [depth_min_m, depth_max_m]");
  }
}

void parse_optional_station_array(Checker& ck, const json& obj,
                                  const std::string& path, const char* key,
                                  std::size_t stations,
                                  std::vector<std::optional<double>>& out) {
  out.assign(stations, std::nullopt);
  if (!obj.contains(key)) return;
  const json& arr = obj.at(key);
  if (!arr.is_array() || arr.size() != stations) {
    ck.add(path + "." + key, "expected an array with one entry per station");
    return;
  }
  for (std::size_t j = 0; j < stations; ++j) {
    if (arr[j].is_null()) continue;
    double v = 0.0;
    if (ck.number(arr[j], path + "." + key, v)) out[j] = v;
  }
}

void parse_stations(Checker& ck, const json& root, PumpStationGroup& group,
                    CostWeights& weights) {
  const json* s = ck.required(root, "scenario", "stations");
  if (!s || !s->is_object()) {
    if (s) ck.add("stations", "expected an object");
    return;
  }
  const std::string path = "stations";
  ck.reject_unknown_keys(*s, path,
                         {"ids", "pump_ids", "max_counts", "coupling", "power_mode",
                          "per_pump_power_kw", "combos"});

  if (const json* v = ck.required(*s, path, "ids")) {
    if (v->is_array()) {
      for (std::size_t j = 0; j < v->size(); ++j) {
        std::string id;
        if (ck.text((*v)[j], path + ".ids", id)) group.station_ids.push_back(id);
      }
    } else {
      ck.add(path + ".ids", "expected an array of station names");
    }
  }
  if (const json* v = ck.required(*s, path, "max_counts")) {
    if (v->is_array()) {
      for (std::size_t j = 0; j < v->size(); ++j) {
        long c = 0;
        if (ck.integer((*v)[j], path + ".max_counts", c)) {
          if (c < 1) ck.add(path + ".max_counts", "each station needs at least one pump");
          group.max_counts.push_back(static_cast<int>(c));
        }
      }
    } else {
      ck.add(path + ".max_counts", "expected an array of pump counts");
    }
  }
  const std::size_t stations = group.max_counts.size();
  if (stations != 2) {
    ck.add(path + ".max_counts", "exactly two pump stations are supported");
    return;
  }
  if (group.station_ids.size() != stations) {
    ck.add(path + ".ids", "must match the number of stations");
    return;
  }

  if (const json* v = ck.required(*s, path, "pump_ids")) {
    if (v->is_array() && v->size() == stations) {
      for (std::size_t j = 0; j < stations; ++j) {
        std::vector<std::string> names;
        if ((*v)[j].is_array()) {
          for (const auto& name : (*v)[j]) {
            std::string id;
            if (ck.text(name, path + ".pump_ids", id)) names.push_back(id);
          }
        }
        if (names.size() != static_cast<std::size_t>(group.max_counts[j])) {
          ck.add(path + ".pump_ids", "one pump name per available pump required");
        }
        group.pump_ids.push_back(std::move(names));
      }
    } else {
      ck.add(path + ".pump_ids", "expected one name list per station");
    }
  }

  std::string coupling;
  if (const json* v = ck.required(*s, path, "coupling")) {
    ck.text(*v, path + ".coupling", coupling);
  }
  if (coupling == "chain") {
    group.coupling = StationCoupling::kChain;
  } else if (coupling == "none") {
    group.coupling = StationCoupling::kNone;
  } else {
    ck.add(path + ".coupling", "expected \"chain\" or \"none\"");
  }

  std::string mode;
  if (const json* v = ck.required(*s, path, "power_mode")) {
    ck.text(*v, path + ".power_mode", mode);
  }
  if (mode == "table") {
    group.power_mode = PowerMode::kTable;
  } else if (mode == "per_pump_constant") {
    group.power_mode = PowerMode::kPerPumpConstant;
  } else {
    ck.add(path + ".power_mode", "expected \"table\" or \"per_pump_constant\"");
  }

  weights.per_pump_power_kw = 0.0;
  if (s->contains("per_pump_power_kw")) {
    ck.number(s->at("per_pump_power_kw"), path + ".per_pump_power_kw",
              weights.per_pump_power_kw);
    if (weights.per_pump_power_kw < 0.0) {
      ck.add(path + ".per_pump_power_kw", "must be non-negative");
    }
  } else if (group.power_mode == PowerMode::kPerPumpConstant) {
    ck.add(path + ".per_pump_power_kw", "required in per_pump_constant mode");
  }

  const json* combos = ck.required(*s, path, "combos");
  if (!combos || !combos->is_array()) {
    if (combos) ck.add(path + ".combos", "expected an array");
    return;
  }
  for (std::size_t i = 0; i < combos->size(); ++i) {
    const json& row = (*combos)[i];
    std::ostringstream ps;
    ps << path << ".combos[" << i << "]";
    const std::string row_path = ps.str();
    if (!row.is_object()) {
      ck.add(row_path, "expected an object");
      continue;
    }
    ck.reject_unknown_keys(row, row_path,
                           {"counts", "flow_ls", "station_power_kw", "head_m", "efficiency"});
    PumpComboRecord rec;
    if (const json* v = ck.required(row, row_path, "counts")) {
      if (v->is_array() && v->size() == stations) {
        for (std::size_t j = 0; j < stations; ++j) {
          long c = 0;
          if (ck.integer((*v)[j], row_path + ".counts", c)) {
            rec.counts.push_back(static_cast<int>(c));
            if (c < 0 || c > group.max_counts[j]) {
              ck.add(row_path + ".counts", "outside the station pump bounds");
            }
          }
        }
      } else {
        ck.add(row_path + ".counts", "expected one count per station");
      }
    }
    double flow_ls = 0.0;
    if (get_number_field(ck, row, row_path, "flow_ls", flow_ls)) {
      if (flow_ls < 0.0) ck.add(row_path + ".flow_ls", "must be non-negative");
      rec.flow_m3s = flow_ls / 1000.0;
    }
    if (const json* v = ck.required(row, row_path, "station_power_kw")) {
      if (v->is_array() && v->size() == stations) {
        for (std::size_t j = 0; j < stations; ++j) {
          double p = 0.0;
          if (ck.number((*v)[j], row_path + ".station_power_kw", p)) {
            if (p < 0.0) ck.add(row_path + ".station_power_kw", "must be non-negative");
            rec.station_power_kw.push_back(p);
          }
        }
      } else {
        ck.add(row_path + ".station_power_kw", "expected one value per station");
      }
    }
    parse_optional_station_array(ck, row, row_path, "head_m", stations, rec.head_m);
    parse_optional_station_array(ck, row, row_path, "efficiency", stations,
                                 rec.efficiency);
    for (std::size_t j = 0; j < rec.efficiency.size(); ++j) {
      if (rec.efficiency[j] && (*rec.efficiency[j] <= 0.0 || *rec.efficiency[j] > 1.0)) {
        ck.add(row_path + ".efficiency", "must lie in (0, 1]");
      }
    }
    if (rec.counts.size() == stations) group.combos.push_back(std::move(rec));
  }

  // Table-level invariants.
  for (std::size_t i = 0; i < group.combos.size(); ++i) {
    for (std::size_t k = i + 1; k < group.combos.size(); ++k) {
      if (group.combos[i].counts == group.combos[k].counts) {
        ck.add(path + ".combos", "duplicate combination row");
      }
    }
  }
  const ControlVector zero{std::vector<int>(stations, 0)};
  const PumpComboRecord* zero_row = group.find_combo(zero);
  if (!zero_row) {
    ck.add(path + ".combos", "the all-zero combination row is required");
  } else if (zero_row->flow_m3s != 0.0 || zero_row->total_power_kw() != 0.0) {
    ck.add(path + ".combos", "the all-zero combination must have zero flow and power");
  }
  for (const ControlVector& u : group.admissible_controls()) {
    if (!group.find_combo(u)) {
      ck.add(path + ".combos", "missing row for an admissible combination");
    }
  }
  std::sort(group.combos.begin(), group.combos.end(),
            [](const PumpComboRecord& a, const PumpComboRecord& b) {
              return control_preference_less(ControlVector{a.counts},
                                             ControlVector{b.counts});
            });
}

void parse_tariff(Checker& ck, const json& root, TariffSchedule& tariff) {
  const json* t = ck.required(root, "scenario", "tariff");
  if (!t || !t->is_object()) {
    if (t) ck.add("tariff", "expected an object");
    return;
  }
  const std::string path = "tariff";
  ck.reject_unknown_keys(
      *t, path, {"offpeak_price_p_per_kwh", "peak_price_p_per_kwh", "offpeak_window_hours"});
  get_number_field(ck, *t, path, "offpeak_price_p_per_kwh",
                   tariff.price_offpeak_p_per_kwh);
  get_number_field(ck, *t, path, "peak_price_p_per_kwh", tariff.price_peak_p_per_kwh);
  if (!(tariff.price_offpeak_p_per_kwh > 0.0)) {
    ck.add(path + ".offpeak_price_p_per_kwh", "must be positive");
  }
  if (!(tariff.price_peak_p_per_kwh > 0.0)) {
    ck.add(path + ".peak_price_p_per_kwh", "must be positive");
  }
  if (const json* v = ck.required(*t, path, "offpeak_window_hours")) {
    long a = 0;
    long b = 0;
    if (v->is_array() && v->size() == 2 &&
        ck.integer((*v)[0], path + ".offpeak_window_hours", a) &&
        ck.integer((*v)[1], path + ".offpeak_window_hours", b)) {
      if (a < 0 || b > 24 || a >= b) {
        ck.add(path + ".offpeak_window_hours",
               "expected a half-open hour window within [0, 24)");
      }
      tariff.offpeak_start_hour = static_cast<int>(a);
      tariff.offpeak_end_hour = static_cast<int>(b);
    } else {
      ck.add(path + ".offpeak_window_hours", "expected [start_hour, end_hour]");
    }
  }
}

void parse_demand(Checker& ck, const json& root, DemandProfile& demand) {
  const json* d = ck.required(root, "scenario", "demand");
  if (!d || !d->is_object()) {
    if (d) ck.add("demand", "expected an object");
    return;
  }
  const std::string path = "demand";
  ck.reject_unknown_keys(*d, path, {"base_ls", "multipliers"});
  double base_ls = 0.0;
  if (get_number_field(ck, *d, path, "base_ls", base_ls)) {
    if (base_ls < 0.0) ck.add(path + ".base_ls", "must be non-negative");
    demand.base_demand_m3s = base_ls / 1000.0;
  }
  if (const json* v = ck.required(*d, path, "multipliers")) {
    if (v->is_array() && v->size() == 24) {
      for (std::size_t i = 0; i < 24; ++i) {
        double m = 0.0;
        if (ck.number((*v)[i], path + ".multipliers", m)) {
          if (m < 0.0) ck.add(path + ".multipliers", "must be non-negative");
          demand.multipliers.push_back(m);
        }
      }
      if (demand.multipliers.size() == 24) {
        const double mean =
            std::accumulate(demand.multipliers.begin(), demand.multipliers.end(), 0.0) /
            24.0;
        if (std::abs(mean - 1.0) > 1e-9) {
          std::ostringstream os;
          os << "mean must be 1.0 within 1e-9 (got " << mean << ")";
          ck.add(path + ".multipliers", os.str());
        }
      }
    } else {
      ck.add(path + ".multipliers", "expected 24 hourly values");
    }
  }
}

bool parse_weights_matrix(Checker& ck, const json& v, const std::string& path,
                          std::size_t stations, Matrix& out) {
  if (!v.is_array() || v.empty()) {
    ck.add(path, "expected a diagonal array or a full matrix");
    return false;
  }
  if (v[0].is_array()) {
    if (v.size() != stations) {
      ck.add(path, "matrix must be stations x stations");
      return false;
    }
    out = Matrix::zero(stations);
    for (std::size_t i = 0; i < stations; ++i) {
      if (!v[i].is_array() || v[i].size() != stations) {
        ck.add(path, "matrix must be stations x stations");
        return false;
      }
      for (std::size_t j = 0; j < stations; ++j) {
        double x = 0.0;
        if (!ck.number(v[i][j], path, x)) return false;
        out(i, j) = x;
      }
    }
  } else {
    if (v.size() != stations) {
      ck.add(path, "diagonal must have one entry per station");
      return false;
    }
    std::vector<double> diag;
    for (std::size_t i = 0; i < stations; ++i) {
      double x = 0.0;
      if (!ck.number(v[i], path, x)) return false;
      diag.push_back(x);
    }
    out = Matrix::diagonal(diag);
  }
  if (!is_symmetric(out, 0.0)) {
    ck.add(path, "matrix must be symmetric");
    return false;
  }
  double scale = 1.0;
  for (double x : out.a) scale = std::max(scale, std::abs(x));
  if (min_eigenvalue_symmetric(out) < -1e-9 * scale) {
    ck.add(path, "matrix must be positive semidefinite");
    return false;
  }
  return true;
}

void parse_controller(Checker& ck, const json& root, ScenarioConfig& cfg) {
  const json* c = ck.required(root, "scenario", "controller");
  if (!c || !c->is_object()) {
    if (c) ck.add("controller", "expected an object");
    return;
  }
  const std::string path = "controller";
  ck.reject_unknown_keys(*c, path, {"kind", "empc", "trigger"});
  std::string kind;
  if (const json* v = ck.required(*c, path, "kind")) ck.text(*v, path + ".kind", kind);
  if (kind == "empc") {
    cfg.controller = ControllerKind::kEmpc;
  } else if (kind == "trigger") {
    cfg.controller = ControllerKind::kTrigger;
  } else {
    ck.add(path + ".kind", "expected \"empc\" or \"trigger\"");
  }

  const std::size_t stations = cfg.model.stations.station_count();
  if (c->contains("empc")) {
    const json& e = c->at("empc");
    const std::string epath = path + ".empc";
    if (!e.is_object()) {
      ck.add(epath, "expected an object");
    } else {
      ck.reject_unknown_keys(e, epath,
                             {"horizon_steps", "dt_control_s", "depth_grid_resolution_m",
                              "integer_prefix_steps", "switching_weights",
                              "initial_control"});
      long n = 0;
      if (get_integer_field(ck, e, epath, "horizon_steps", n)) {
        if (n < 1) ck.add(epath + ".horizon_steps", "must be at least 1");
        cfg.empc.horizon_steps = static_cast<int>(n);
      }
      long dt = 0;
      if (get_integer_field(ck, e, epath, "dt_control_s", dt)) {
        if (dt < 1 || 3600 % dt != 0) {
          ck.add(epath + ".dt_control_s", "must divide one hour");
        } else {
          cfg.empc.dt_control_s = static_cast<int>(dt);
        }
      }
      get_number_field(ck, e, epath, "depth_grid_resolution_m",
                       cfg.empc.depth_grid_resolution_m);
      if (!(cfg.empc.depth_grid_resolution_m > 0.0)) {
        ck.add(epath + ".depth_grid_resolution_m", "must be positive");
      }
      long prefix = 0;
      if (get_integer_field(ck, e, epath, "integer_prefix_steps", prefix)) {
        if (prefix < 1 || prefix > cfg.empc.horizon_steps) {
          ck.add(epath + ".integer_prefix_steps", "must lie in [1, horizon_steps]");
        } else {
          cfg.empc.integer_prefix_steps = static_cast<int>(prefix);
        }
      }
      if (const json* v = ck.required(e, epath, "switching_weights")) {
        parse_weights_matrix(ck, *v, epath + ".switching_weights", stations,
                             cfg.empc.weights.switching_R);
      }
      if (const json* v = ck.required(e, epath, "initial_control")) {
        if (v->is_array() && v->size() == stations) {
          for (std::size_t j = 0; j < stations; ++j) {
            long x = 0;
            if (ck.integer((*v)[j], epath + ".initial_control", x)) {
              cfg.empc.initial_control.counts.push_back(static_cast<int>(x));
            }
          }
          if (cfg.empc.initial_control.counts.size() == stations &&
              !is_admissible(cfg.model.stations, cfg.empc.initial_control)) {
            ck.add(epath + ".initial_control", "must be an admissible combination");
          }
        } else {
          ck.add(epath + ".initial_control", "expected one count per station");
        }
      }
      cfg.empc.weights.per_pump_power_kw = cfg.model.weights.per_pump_power_kw;
    }
  } else if (cfg.controller == ControllerKind::kEmpc) {
    ck.add(path + ".empc", "required when kind is \"empc\"");
  }

  if (c->contains("trigger")) {
    const json& t = c->at("trigger");
    const std::string tpath = path + ".trigger";
    if (!t.is_object()) {
      ck.add(tpath, "expected an object");
    } else {
      ck.reject_unknown_keys(t, tpath, {"bands", "initial_on"});
      std::vector<std::string> all_pumps;
      for (const auto& station : cfg.model.stations.pump_ids) {
        all_pumps.insert(all_pumps.end(), station.begin(), station.end());
      }
      if (const json* v = ck.required(t, tpath, "bands")) {
        if (v->is_array()) {
          for (std::size_t i = 0; i < v->size(); ++i) {
            const json& row = (*v)[i];
            std::ostringstream ps;
            ps << tpath << ".bands[" << i << "]";
            const std::string row_path = ps.str();
            if (!row.is_object()) {
              ck.add(row_path, "expected an object");
              continue;
            }
            ck.reject_unknown_keys(row, row_path, {"pump", "on_below_m", "off_above_m"});
            TriggerBand band;
            if (const json* p = ck.required(row, row_path, "pump")) {
              ck.text(*p, row_path + ".pump", band.pump_id);
            }
            get_number_field(ck, row, row_path, "on_below_m", band.on_below_m);
            get_number_field(ck, row, row_path, "off_above_m", band.off_above_m);
            if (!(band.on_below_m < band.off_above_m)) {
              ck.add(row_path, "on_below_m must be below off_above_m");
            }
            bool found = false;
            for (std::size_t j = 0; j < cfg.model.stations.pump_ids.size(); ++j) {
              const auto& names = cfg.model.stations.pump_ids[j];
              if (std::find(names.begin(), names.end(), band.pump_id) != names.end()) {
                band.station = j;
                found = true;
              }
            }
            if (!found) ck.add(row_path + ".pump", "unknown pump name");
            cfg.trigger_bands.push_back(std::move(band));
          }
          for (const std::string& pump : all_pumps) {
            const auto match = [&](const TriggerBand& b) { return b.pump_id == pump; };
            const long hits = std::count_if(cfg.trigger_bands.begin(),
                                            cfg.trigger_bands.end(), match);
            if (hits != 1) {
              ck.add(tpath + ".bands", "exactly one band required for pump " + pump);
            }
          }
          // Hysteresis can reach any box combination, so the plant needs a
          // combo row for every one of them, not only the admissible set.
          ControlVector u;
          u.counts.assign(cfg.model.stations.station_count(), 0);
          bool done = cfg.model.stations.station_count() == 0;
          while (!done) {
            if (!cfg.model.stations.find_combo(u)) {
              ck.add("stations.combos",
                     "trigger control requires a row for every pump-count "
                     "combination within the station bounds");
              break;
            }
            std::size_t j = 0;
            for (; j < u.counts.size(); ++j) {
              if (u.counts[j] < cfg.model.stations.max_counts[j]) {
                ++u.counts[j];
                std::fill(u.counts.begin(),
                          u.counts.begin() + static_cast<long>(j), 0);
                break;
              }
            }
            done = j == u.counts.size();
          }
        } else {
          ck.add(tpath + ".bands", "expected an array");
        }
      }
      cfg.trigger_initial_on.assign(cfg.trigger_bands.size(), false);
      if (t.contains("initial_on")) {
        const json& v = t.at("initial_on");
        if (!v.is_array()) {
          ck.add(tpath + ".initial_on", "expected an array of pump names");
        } else {
          for (const auto& item : v) {
            std::string name;
            if (!ck.text(item, tpath + ".initial_on", name)) continue;
            bool found = false;
            for (std::size_t i = 0; i < cfg.trigger_bands.size(); ++i) {
              if (cfg.trigger_bands[i].pump_id == name) {
                cfg.trigger_initial_on[i] = true;
                found = true;
              }
            }
            if (!found) ck.add(tpath + ".initial_on", "unknown pump name " + name);
          }
        }
      }
    }
  } else if (cfg.controller == ControllerKind::kTrigger) {
    ck.add(path + ".trigger", "required when kind is \"trigger\"");
  }
}

void parse_simulation(Checker& ck, const json& root, ScenarioConfig& cfg) {
  const json* s = ck.required(root, "scenario", "simulation");
  if (!s || !s->is_object()) {
    if (s) ck.add("simulation", "expected an object");
    return;
  }
  const std::string path = "simulation";
  ck.reject_unknown_keys(*s, path, {"hours", "dt_plant_s", "plant_mismatch", "seed"});
  long hours = 0;
  if (get_integer_field(ck, *s, path, "hours", hours)) {
    if (hours < 24) ck.add(path + ".hours", "must be at least 24");
    cfg.sim_hours = static_cast<int>(hours);
  }
  long dt = 0;
  if (get_integer_field(ck, *s, path, "dt_plant_s", dt)) {
    if (dt < 1) {
      ck.add(path + ".dt_plant_s", "must be positive");
    } else {
      cfg.dt_plant_s = static_cast<int>(dt);
      if (cfg.empc.dt_control_s % cfg.dt_plant_s != 0) {
        ck.add(path + ".dt_plant_s", "must divide the control interval");
      }
      if (static_cast<long>(cfg.sim_hours) * 3600 % cfg.dt_plant_s != 0) {
        ck.add(path + ".dt_plant_s", "must divide the simulation length");
      }
    }
  }
  get_number_field(ck, *s, path, "plant_mismatch", cfg.plant_mismatch);
  if (!(cfg.plant_mismatch > 0.0)) {
    ck.add(path + ".plant_mismatch", "must be positive");
  }
  long seed = 0;
  if (get_integer_field(ck, *s, path, "seed", seed)) {
    if (seed < 0) ck.add(path + ".seed", "must be non-negative");
    cfg.seed = static_cast<std::uint64_t>(seed);
  }
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // Report the line of the syntax error from the byte offset.
    std::size_t line = 1;
    for (std::size_t i = 0; i < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') ++line;
    }
    std::ostringstream os;
    os << "scenario parse error at line " << line << ": " << e.what();
    throw ScenarioError(os.str(), {{"(syntax)", e.what()}});
  }

  Checker ck;
  ScenarioConfig cfg;
  if (!root.is_object()) {
    ck.add("scenario", "expected a JSON object");
    ck.throw_if_failed("invalid scenario");
  }
  ck.reject_unknown_keys(root, "scenario",
                         {"version", "tanks", "stations", "tariff", "demand",
                          "controller", "simulation"});
  long version = 0;
  if (get_integer_field(ck, root, "scenario", "version", version)) {
    if (version != 1) ck.add("version", "unsupported scenario version");
  }
  parse_tank(ck, root, cfg.model.tank);
  parse_stations(ck, root, cfg.model.stations, cfg.model.weights);
  parse_tariff(ck, root, cfg.model.tariff);
  parse_demand(ck, root, cfg.model.demand);
  parse_controller(ck, root, cfg);
  parse_simulation(ck, root, cfg);
  ck.throw_if_failed("invalid scenario");
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ScenarioError("cannot open scenario file: " + path.string(),
                        {{"(file)", "cannot open " + path.string()}});
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario(buffer.str());
}

std::string serialize_scenario(const ScenarioConfig& cfg) {
  json root;
  root["version"] = 1;

  json tank;
  tank["id"] = cfg.model.tank.id;
  tank["area_m2"] = cfg.model.tank.area_m2;
  tank["depth_min_m"] = cfg.model.tank.depth_min_m;
  tank["depth_max_m"] = cfg.model.tank.depth_max_m;
  tank["depth_init_m"] = cfg.model.tank.depth_init_m;
  root["tanks"] = json::array({tank});

  json stations;
  stations["ids"] = cfg.model.stations.station_ids;
  stations["pump_ids"] = cfg.model.stations.pump_ids;
  stations["max_counts"] = cfg.model.stations.max_counts;
  stations["coupling"] =
      cfg.model.stations.coupling == StationCoupling::kChain ? "chain" : "none";
  stations["power_mode"] = cfg.model.stations.power_mode == PowerMode::kTable
                               ? "table"
                               : "per_pump_constant";
  stations["per_pump_power_kw"] = cfg.model.weights.per_pump_power_kw;
  json combos = json::array();
  for (const PumpComboRecord& rec : cfg.model.stations.combos) {
    json row;
    row["counts"] = rec.counts;
    row["flow_ls"] = rec.flow_m3s * 1000.0;
    row["station_power_kw"] = rec.station_power_kw;
    json heads = json::array();
    json effs = json::array();
    bool any_head = false;
    bool any_eff = false;
    for (std::size_t j = 0; j < rec.head_m.size(); ++j) {
      heads.push_back(rec.head_m[j] ? json(*rec.head_m[j]) : json(nullptr));
      any_head = any_head || rec.head_m[j].has_value();
    }
    for (std::size_t j = 0; j < rec.efficiency.size(); ++j) {
      effs.push_back(rec.efficiency[j] ? json(*rec.efficiency[j]) : json(nullptr));
      any_eff = any_eff || rec.efficiency[j].has_value();
    }
    if (any_head) row["head_m"] = heads;
    if (any_eff) row["efficiency"] = effs;
    combos.push_back(row);
  }
  stations["combos"] = combos;
  root["stations"] = stations;

  json tariff;
  tariff["offpeak_price_p_per_kwh"] = cfg.model.tariff.price_offpeak_p_per_kwh;
  tariff["peak_price_p_per_kwh"] = cfg.model.tariff.price_peak_p_per_kwh;
  tariff["offpeak_window_hours"] = json::array(
      {cfg.model.tariff.offpeak_start_hour, cfg.model.tariff.offpeak_end_hour});
  root["tariff"] = tariff;

  json demand;
  demand["base_ls"] = cfg.model.demand.base_demand_m3s * 1000.0;
  demand["multipliers"] = cfg.model.demand.multipliers;
  root["demand"] = demand;

  json controller;
  controller["kind"] =
      cfg.controller == ControllerKind::kEmpc ? "empc" : "trigger";
  json empc;
  empc["horizon_steps"] = cfg.empc.horizon_steps;
  empc["dt_control_s"] = cfg.empc.dt_control_s;
  empc["depth_grid_resolution_m"] = cfg.empc.depth_grid_resolution_m;
  empc["integer_prefix_steps"] = cfg.empc.integer_prefix_steps;
  json weights = json::array();
  const Matrix& R = cfg.empc.weights.switching_R;
  for (std::size_t i = 0; i < R.n; ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < R.n; ++j) row.push_back(R(i, j));
    weights.push_back(row);
  }
  empc["switching_weights"] = weights;
  empc["initial_control"] = cfg.empc.initial_control.counts;
  controller["empc"] = empc;
  if (!cfg.trigger_bands.empty()) {
    json trigger;
    json bands = json::array();
    for (const TriggerBand& band : cfg.trigger_bands) {
      json row;
      row["pump"] = band.pump_id;
      row["on_below_m"] = band.on_below_m;
      row["off_above_m"] = band.off_above_m;
      bands.push_back(row);
    }
    trigger["bands"] = bands;
    json initial_on = json::array();
    for (std::size_t i = 0; i < cfg.trigger_bands.size(); ++i) {
      if (i < cfg.trigger_initial_on.size() && cfg.trigger_initial_on[i]) {
        initial_on.push_back(cfg.trigger_bands[i].pump_id);
      }
    }
    trigger["initial_on"] = initial_on;
    controller["trigger"] = trigger;
  }
  root["controller"] = controller;

  json simulation;
  simulation["hours"] = cfg.sim_hours;
  simulation["dt_plant_s"] = cfg.dt_plant_s;
  simulation["plant_mismatch"] = cfg.plant_mismatch;
  simulation["seed"] = cfg.seed;
  root["simulation"] = simulation;

  return root.dump(2) + "\n";
}

std::string trace_to_csv(const SimulationTrace& trace) {
  std::string out =
      "time_s,depth_m,n1,n2,inflow_m3s,demand_m3s,power_kw,price_p_per_kwh,"
      "energy_kwh,cost_pence\n";
  for (const TraceRecord& rec : trace.records) {
    out += fmt_double(rec.time_s);
    out += ',';
    out += fmt_double(rec.depth_m);
    for (int count : rec.control.counts) {
      out += ',';
      out += std::to_string(count);
    }
    out += ',';
    out += fmt_double(rec.inflow_m3s);
    out += ',';
    out += fmt_double(rec.demand_m3s);
    out += ',';
    out += fmt_double(rec.power_kw);
    out += ',';
    out += fmt_double(rec.price_p_per_kwh);
    out += ',';
    out += fmt_double(rec.energy_kwh);
    out += ',';
    out += fmt_double(rec.cost_pence);
    out += '\n';
  }
  return out;
}

std::string trace_to_jsonl(const SimulationTrace& trace) {
  std::string out;
  for (const TraceRecord& rec : trace.records) {
    json row;
    row["time_s"] = rec.time_s;
    row["depth_m"] = rec.depth_m;
    row["n1"] = rec.control.counts.size() > 0 ? rec.control.counts[0] : 0;
    row["n2"] = rec.control.counts.size() > 1 ? rec.control.counts[1] : 0;
    row["inflow_m3s"] = rec.inflow_m3s;
    row["demand_m3s"] = rec.demand_m3s;
    row["power_kw"] = rec.power_kw;
    row["price_p_per_kwh"] = rec.price_p_per_kwh;
    row["energy_kwh"] = rec.energy_kwh;
    row["cost_pence"] = rec.cost_pence;
    out += row.dump();
    out += '\n';
  }
  return out;
}

namespace {

json metrics_to_json_value(const RunMetrics& metrics) {
  json m;
  m["status"] = metrics.status == RunStatus::kOk ? "ok" : "infeasible";
  m["status_detail"] = metrics.status_detail;
  m["first_infeasible_hour"] = metrics.first_infeasible_hour
                                   ? json(*metrics.first_infeasible_hour)
                                   : json(nullptr);
  m["total_volume_m3"] = metrics.total_volume_m3;
  m["total_energy_kwh"] = metrics.total_energy_kwh;
  m["total_cost_pounds"] = metrics.total_cost_pounds;
  m["cost_per_m3_pounds"] = metrics.cost_per_m3;
  json days = json::array();
  for (const DayMetrics& day : metrics.per_day) {
    json d;
    d["volume_m3"] = day.volume_m3;
    d["energy_kwh"] = day.energy_kwh;
    d["cost_pounds"] = day.cost_pounds;
    d["cost_per_m3_pounds"] = day.cost_per_m3;
    days.push_back(d);
  }
  m["per_day"] = days;
  json eff;
  for (std::size_t i = 0; i < metrics.pump_names.size(); ++i) {
    eff[metrics.pump_names[i]] =
        metrics.avg_pump_efficiency[i] ? json(*metrics.avg_pump_efficiency[i])
                                       : json(nullptr);
  }
  m["avg_pump_efficiency"] = eff;
  m["switch_count"] = metrics.switch_count;
  m["bound_violation_count"] = metrics.bound_violation_count;
  m["first_violation_time_s"] = metrics.first_violation_time_s
                                    ? json(*metrics.first_violation_time_s)
                                    : json(nullptr);
  return m;
}

}  // namespace

std::string metrics_to_json(const RunMetrics& metrics) {
  return metrics_to_json_value(metrics).dump(2) + "\n";
}

std::string comparison_to_json(const ComparisonReport& report) {
  json c;
  c["empc"] = metrics_to_json_value(report.empc);
  c["trigger"] = metrics_to_json_value(report.trigger);
  c["cost_ratio"] = report.cost_ratio ? json(*report.cost_ratio) : json(nullptr);
  if (report.cost_ratio) {
    c["cost_ratio_rounded"] = fmt_fixed(*report.cost_ratio, 4);
  }
  if (!report.note.empty()) c["note"] = report.note;
  // Day 4 mirrors the final-day comparison when the run covers four days.
  if (report.empc.per_day.size() >= 4 && report.trigger.per_day.size() >= 4) {
    json d4;
    for (const char* name : {"empc", "trigger"}) {
      const DayMetrics& day = std::string(name) == "empc"
                                  ? report.empc.per_day[3]
                                  : report.trigger.per_day[3];
      json d;
      d["volume_m3"] = day.volume_m3;
      d["energy_kwh"] = day.energy_kwh;
      d["cost_pounds"] = day.cost_pounds;
      d["cost_per_m3_pounds"] = day.cost_per_m3;
      d4[name] = d;
    }
    c["day4"] = d4;
  }
  return c.dump(2) + "\n";
}

std::string sweep_summary_to_csv(const std::vector<SweepRow>& rows) {
  std::string out =
      "demand_ls,empc_volume_m3,empc_energy_kwh,empc_cost_pounds,empc_cost_per_m3,"
      "trigger_volume_m3,trigger_energy_kwh,trigger_cost_pounds,"
      "trigger_cost_per_m3,cost_ratio,empc_status,trigger_status\n";
  for (const SweepRow& row : rows) {
    out += fmt_double(row.demand_ls);
    const auto metric_cells = [&](const RunMetrics& m, bool ok) {
      if (!ok) {
        out += ",,,,";
        return;
      }
      out += ',';
      out += fmt_double(m.total_volume_m3);
      out += ',';
      out += fmt_double(m.total_energy_kwh);
      out += ',';
      out += fmt_double(m.total_cost_pounds);
      out += ',';
      out += fmt_double(m.cost_per_m3);
    };
    metric_cells(row.report.empc, row.empc_status == "ok");
    metric_cells(row.report.trigger, row.trigger_status == "ok");
    out += ',';
    if (row.report.cost_ratio) out += fmt_fixed(*row.report.cost_ratio, 4);
    out += ',';
    out += row.empc_status;
    out += ',';
    out += row.trigger_status;
    out += '\n';
  }
  return out;
}

std::string sweep_summary_to_jsonl(const std::vector<SweepRow>& rows) {
  std::string out;
  for (const SweepRow& row : rows) {
    json r;
    r["demand_ls"] = row.demand_ls;
    r["empc_status"] = row.empc_status;
    r["trigger_status"] = row.trigger_status;
    r["empc"] = metrics_to_json_value(row.report.empc);
    r["trigger"] = metrics_to_json_value(row.report.trigger);
    r["cost_ratio"] =
        row.report.cost_ratio ? json(*row.report.cost_ratio) : json(nullptr);
    out += r.dump();
    out += '\n';
  }
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write file: " + path.string());
  }
  out << text;
}

}  // namespace wds
