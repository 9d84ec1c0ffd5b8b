#pragma once

// Domain types for the isolated hybrid ac/dc microgrid: buses, lines,
// distributed generators, the interlinking converter and the hourly
// operating scenario.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hmg {

/// Raised when input data is structurally malformed (bad row, bad field).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when well-formed input violates a domain invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a caller breaks an operation's precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class Subgrid { kAc, kDc };

enum class UnitKind { kWT, kPV, kMT, kFC };

inline const char* to_string(UnitKind k) {
  switch (k) {
    case UnitKind::kWT: return "WT";
    case UnitKind::kPV: return "PV";
    case UnitKind::kMT: return "MT";
    case UnitKind::kFC: return "FC";
  }
  return "?";
}

inline bool is_renewable(UnitKind k) { return k == UnitKind::kWT || k == UnitKind::kPV; }

struct Bus {
  int id = 0;
  Subgrid subgrid = Subgrid::kAc;
  double v_min = 0.9;  // pu
  double v_max = 1.1;  // pu
  double peak_active_load = 0.0;    // kW
  double peak_reactive_load = 0.0;  // kvar

  void validate() const {
    if (!(v_min > 0.0 && v_min < v_max))
      throw ValidationError("bus " + std::to_string(id) + ": require 0 < v_min < v_max");
    if (peak_active_load < 0.0 || peak_reactive_load < 0.0)
      throw ValidationError("bus " + std::to_string(id) + ": negative peak load");
    if (subgrid == Subgrid::kDc && peak_reactive_load != 0.0)
      throw ValidationError("bus " + std::to_string(id) + ": dc bus with reactive load");
  }
};

struct Line {
  int from_bus = 0;
  int to_bus = 0;
  double resistance = 0.0;  // pu
  double reactance = 0.0;   // pu
  double capacity = 0.0;    // kW

  void validate() const {
    if (resistance < 0.0)
      throw ValidationError("line " + std::to_string(from_bus) + "-" + std::to_string(to_bus) +
                            ": negative resistance");
    if (!(capacity > 0.0))
      throw ValidationError("line " + std::to_string(from_bus) + "-" + std::to_string(to_bus) +
                            ": capacity must be positive");
  }
};

struct DGUnit {
  int id = 0;
  std::string name;
  int bus = 0;
  UnitKind kind = UnitKind::kMT;
  bool dispatchable = true;
  double p_min = 0.0;          // kW
  double p_max = 0.0;          // kW
  double energy_cost = 0.0;    // currency per kWh
  double startup_cost = 0.0;   // currency
  double shutdown_cost = 0.0;  // currency
  double ramp_up = 0.0;        // kW/h
  double ramp_down = 0.0;      // kW/h
  double capacity = 0.0;       // kW nameplate (renewables)

  void validate() const {
    const std::string tag = "unit " + (name.empty() ? std::to_string(id) : name);
    if (!(p_min >= 0.0 && p_min <= p_max)) throw ValidationError(tag + ": require 0 <= p_min <= p_max");
    if (is_renewable(kind) && dispatchable) throw ValidationError(tag + ": renewables are non-dispatchable");
    if (dispatchable && !(ramp_up > 0.0 && ramp_down > 0.0))
      throw ValidationError(tag + ": dispatchable unit needs positive ramp rates");
    if (capacity < 0.0) throw ValidationError(tag + ": negative capacity");
  }
};

/// Bidirectional ac/dc interlinking converter. Positive power flows from the
/// ac side into the dc sub-grid; negative power is exported dc -> ac.
struct Converter {
  double p_min = -1000.0;  // kW
  double p_max = 1000.0;   // kW
  int ac_bus = 0;
  int dc_bus = 0;

  void validate() const {
    if (!(p_min < 0.0 && 0.0 < p_max)) throw ValidationError("converter: require p_min < 0 < p_max");
  }
};

/// The physical microgrid. Immutable after construction.
class Network {
 public:
  Network() = default;
  Network(std::string name, std::vector<Bus> buses, std::vector<Line> lines, std::vector<DGUnit> units,
          Converter converter, int slack_bus, double base_kva = 1000.0)
      : name_(std::move(name)),
        buses_(std::move(buses)),
        lines_(std::move(lines)),
        units_(std::move(units)),
        converter_(converter),
        slack_bus_(slack_bus),
        base_kva_(base_kva) {
    validate();
  }

  const std::string& name() const { return name_; }
  const std::vector<Bus>& buses() const { return buses_; }
  const std::vector<Line>& lines() const { return lines_; }
  const std::vector<DGUnit>& units() const { return units_; }
  const Converter& converter() const { return converter_; }
  int slack_bus() const { return slack_bus_; }
  double base_kva() const { return base_kva_; }

  /// Position of a bus id in buses(); throws if unknown.
  std::size_t bus_index(int id) const {
    for (std::size_t i = 0; i < buses_.size(); ++i)
      if (buses_[i].id == id) return i;
    throw ValidationError("unknown bus id " + std::to_string(id));
  }

  bool has_bus(int id) const {
    return std::any_of(buses_.begin(), buses_.end(), [id](const Bus& b) { return b.id == id; });
  }

  const Bus& bus(int id) const { return buses_[bus_index(id)]; }

  std::size_t unit_index(int id) const {
    for (std::size_t i = 0; i < units_.size(); ++i)
      if (units_[i].id == id) return i;
    throw ValidationError("unknown unit id " + std::to_string(id));
  }

  Subgrid unit_subgrid(std::size_t unit) const { return bus(units_[unit].bus).subgrid; }

  std::vector<std::size_t> dispatchable_units() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < units_.size(); ++i)
      if (units_[i].dispatchable) out.push_back(i);
    return out;
  }

  std::size_t ac_bus_count() const {
    return static_cast<std::size_t>(
        std::count_if(buses_.begin(), buses_.end(), [](const Bus& b) { return b.subgrid == Subgrid::kAc; }));
  }

  double total_peak_ac_load() const {
    double s = 0.0;
    for (const auto& b : buses_)
      if (b.subgrid == Subgrid::kAc) s += b.peak_active_load;
    return s;
  }

  double total_peak_dc_load() const {
    double s = 0.0;
    for (const auto& b : buses_)
      if (b.subgrid == Subgrid::kDc) s += b.peak_active_load;
    return s;
  }

  /// True when the ac lines form a tree spanning every ac bus.
  bool is_radial() const {
    const std::size_t n_ac = ac_bus_count();
    if (n_ac == 0) return false;
    if (lines_.size() != n_ac - 1) return false;
    std::vector<int> parent(buses_.size());
    for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = static_cast<int>(i);
    auto find = [&](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (const auto& l : lines_) {
      if (!has_bus(l.from_bus) || !has_bus(l.to_bus)) return false;
      int a = find(static_cast<int>(bus_index(l.from_bus)));
      int b = find(static_cast<int>(bus_index(l.to_bus)));
      if (a == b) return false;  // cycle
      parent[a] = b;
    }
    return true;  // n-1 edges and acyclic => connected
  }

 private:
  void validate() const {
    for (const auto& b : buses_) b.validate();
    for (const auto& l : lines_) {
      l.validate();
      if (!has_bus(l.from_bus) || !has_bus(l.to_bus)) throw ValidationError("line references unknown bus");
      if (bus(l.from_bus).subgrid != Subgrid::kAc || bus(l.to_bus).subgrid != Subgrid::kAc)
        throw ValidationError("lines must connect ac buses");
    }
    for (const auto& u : units_) {
      u.validate();
      if (!has_bus(u.bus)) throw ValidationError("unit " + u.name + " on unknown bus");
    }
    converter_.validate();
    if (!has_bus(slack_bus_) || bus(slack_bus_).subgrid != Subgrid::kAc)
      throw ValidationError("slack bus must be an existing ac bus");
    if (!has_bus(converter_.ac_bus) || bus(converter_.ac_bus).subgrid != Subgrid::kAc)
      throw ValidationError("converter ac side must be an ac bus");
    if (!has_bus(converter_.dc_bus) || bus(converter_.dc_bus).subgrid != Subgrid::kDc)
      throw ValidationError("converter dc side must be a dc bus");
    if (!(base_kva_ > 0.0)) throw ValidationError("base power must be positive");
  }

  std::string name_;
  std::vector<Bus> buses_;
  std::vector<Line> lines_;
  std::vector<DGUnit> units_;
  Converter converter_;
  int slack_bus_ = 1;
  double base_kva_ = 1000.0;
};

/// Hourly operating conditions. All series share one length (the horizon).
class Scenario {
 public:
  Scenario() = default;
  Scenario(std::vector<double> ac_load_factor, std::vector<double> dc_load_demand, std::vector<double> wt_pattern,
           std::vector<double> pv_pattern, double reserve_fraction = 0.05, double ens_penalty = 4.0,
           std::vector<double> reserve_kw = {})
      : ac_load_factor_(std::move(ac_load_factor)),
        dc_load_demand_(std::move(dc_load_demand)),
        wt_pattern_(std::move(wt_pattern)),
        pv_pattern_(std::move(pv_pattern)),
        reserve_kw_(std::move(reserve_kw)),
        reserve_fraction_(reserve_fraction),
        ens_penalty_(ens_penalty) {
    validate();
  }

  std::size_t horizon() const { return ac_load_factor_.size(); }
  const std::vector<double>& ac_load_factor() const { return ac_load_factor_; }
  const std::vector<double>& dc_load_demand() const { return dc_load_demand_; }
  const std::vector<double>& wt_pattern() const { return wt_pattern_; }
  const std::vector<double>& pv_pattern() const { return pv_pattern_; }
  double reserve_fraction() const { return reserve_fraction_; }
  double ens_penalty() const { return ens_penalty_; }
  /// Explicit per-hour reserve; empty means reserve_fraction x demand.
  const std::vector<double>& reserve_kw() const { return reserve_kw_; }

  void check_hour(std::size_t hour) const {
    if (hour >= horizon())
      throw std::out_of_range("hour " + std::to_string(hour) + " outside horizon of " +
                              std::to_string(horizon()));
  }

 private:
  void validate() const {
    const std::size_t n = ac_load_factor_.size();
    if (n == 0) throw ValidationError("scenario: empty horizon");
    if (dc_load_demand_.size() != n || wt_pattern_.size() != n || pv_pattern_.size() != n)
      throw ValidationError("scenario: series lengths differ");
    if (!reserve_kw_.empty() && reserve_kw_.size() != n)
      throw ValidationError("scenario: reserve series length differs");
    for (std::size_t t = 0; t < n; ++t) {
      const std::string at = " at hour " + std::to_string(t + 1);
      if (!(ac_load_factor_[t] > 0.0)) throw ValidationError("scenario: load factor must be positive" + at);
      if (dc_load_demand_[t] < 0.0) throw ValidationError("scenario: negative dc load" + at);
      if (wt_pattern_[t] < 0.0 || wt_pattern_[t] > 1.0) throw ValidationError("scenario: wt pattern outside [0,1]" + at);
      if (pv_pattern_[t] < 0.0 || pv_pattern_[t] > 1.0) throw ValidationError("scenario: pv pattern outside [0,1]" + at);
    }
    if (reserve_fraction_ < 0.0) throw ValidationError("scenario: negative reserve fraction");
    if (ens_penalty_ < 0.0) throw ValidationError("scenario: negative ENS penalty");
  }

  std::vector<double> ac_load_factor_;
  std::vector<double> dc_load_demand_;
  std::vector<double> wt_pattern_;
  std::vector<double> pv_pattern_;
  std::vector<double> reserve_kw_;
  double reserve_fraction_ = 0.05;
  double ens_penalty_ = 4.0;
};

/// Available output of a non-dispatchable unit: nameplate capacity x pattern.
inline double res_output(const DGUnit& unit, std::size_t hour, const Scenario& scenario) {
  if (!is_renewable(unit.kind) || unit.dispatchable)
    throw ContractViolation("res_output: unit " + unit.name + " is dispatchable");
  scenario.check_hour(hour);
  const double pattern = unit.kind == UnitKind::kWT ? scenario.wt_pattern()[hour] : scenario.pv_pattern()[hour];
  return unit.capacity * pattern;
}

struct BusLoad {
  double p = 0.0;  // kW
  double q = 0.0;  // kvar
};

/// Demand at a bus for one hour. ac buses scale their peak by the hourly load
/// factor; dc buses share the scenario's dc demand pro rata to their peaks.
inline BusLoad bus_load(const Bus& bus, std::size_t hour, const Scenario& scenario, double total_dc_peak = 0.0) {
  scenario.check_hour(hour);
  if (bus.subgrid == Subgrid::kAc) {
    const double f = scenario.ac_load_factor()[hour];
    return {bus.peak_active_load * f, bus.peak_reactive_load * f};
  }
  if (total_dc_peak <= 0.0) return {scenario.dc_load_demand()[hour], 0.0};
  return {scenario.dc_load_demand()[hour] * bus.peak_active_load / total_dc_peak, 0.0};
}

inline BusLoad bus_load(const Network& net, std::size_t bus_pos, std::size_t hour, const Scenario& scenario) {
  return bus_load(net.buses()[bus_pos], hour, scenario, net.total_peak_dc_load());
}

/// Total ac demand (kW) at an hour.
inline double ac_demand(const Network& net, std::size_t hour, const Scenario& scenario) {
  return net.total_peak_ac_load() * scenario.ac_load_factor()[hour];
}

inline double dc_demand(const Network&, std::size_t hour, const Scenario& scenario) {
  return scenario.dc_load_demand()[hour];
}

/// Spinning reserve requirement Res^t in kW.
inline double reserve_requirement(const Network& net, std::size_t hour, const Scenario& scenario) {
  scenario.check_hour(hour);
  if (!scenario.reserve_kw().empty()) return scenario.reserve_kw()[hour];
  return scenario.reserve_fraction() * (ac_demand(net, hour, scenario) + dc_demand(net, hour, scenario));
}

}  // namespace hmg
