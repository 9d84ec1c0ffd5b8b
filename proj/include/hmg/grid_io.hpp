#pragma once

// Scenario (CSV) and network (JSON) ingestion and export.

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include <json.hpp>

#include "hmg/csv.hpp"
#include "hmg/grid_model.hpp"

namespace hmg {

struct ScenarioOptions {
  double reserve_fraction = 0.05;
  double ens_penalty = 4.0;  // currency per kWh
};

/// Parses `hour,ac_load_factor,dc_load_kw,wt_pattern,pv_pattern` rows.
/// Hours must run 1..N in order.
inline Scenario load_scenario(const std::string& source, const ScenarioOptions& opts = {}) {
  const auto table = csv::read_string(source);
  static constexpr const char* kCols[] = {"hour", "ac_load_factor", "dc_load_kw", "wt_pattern", "pv_pattern"};
  int col[5];
  for (int i = 0; i < 5; ++i) {
    col[i] = table.column(kCols[i]);
    if (col[i] < 0) throw ParseError(std::string("scenario: missing column '") + kCols[i] + "'");
  }
  std::vector<double> f, dc, wt, pv;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    long long hour = 0;
    if (!csv::parse_int(table.rows[r][col[0]], hour) || hour != static_cast<long long>(r + 1))
      throw ParseError("scenario row " + std::to_string(r + 1) + ": expected hour " + std::to_string(r + 1));
    f.push_back(csv::field_double(table, r, col[1], "ac_load_factor"));
    dc.push_back(csv::field_double(table, r, col[2], "dc_load_kw"));
    wt.push_back(csv::field_double(table, r, col[3], "wt_pattern"));
    pv.push_back(csv::field_double(table, r, col[4], "pv_pattern"));
  }
  return Scenario(std::move(f), std::move(dc), std::move(wt), std::move(pv), opts.reserve_fraction, opts.ens_penalty);
}

inline std::string scenario_to_csv(const Scenario& s) {
  std::ostringstream out;
  out << "hour,ac_load_factor,dc_load_kw,wt_pattern,pv_pattern\n";
  out << std::setprecision(10);
  for (std::size_t t = 0; t < s.horizon(); ++t)
    out << t + 1 << ',' << s.ac_load_factor()[t] << ',' << s.dc_load_demand()[t] << ',' << s.wt_pattern()[t] << ','
        << s.pv_pattern()[t] << '\n';
  return out.str();
}

namespace detail {

inline Subgrid subgrid_from(const std::string& s) {
  if (s == "ac") return Subgrid::kAc;
  if (s == "dc") return Subgrid::kDc;
  throw ParseError("network: unknown subgrid '" + s + "'");
}

inline UnitKind kind_from(const std::string& s) {
  if (s == "WT") return UnitKind::kWT;
  if (s == "PV") return UnitKind::kPV;
  if (s == "MT") return UnitKind::kMT;
  if (s == "FC") return UnitKind::kFC;
  throw ParseError("network: unknown unit kind '" + s + "'");
}

}  // namespace detail

inline nlohmann::json network_to_json(const Network& net) {
  using nlohmann::json;
  json j;
  j["name"] = net.name();
  j["base_kva"] = net.base_kva();
  j["slack_bus"] = net.slack_bus();
  j["buses"] = json::array();
  for (const auto& b : net.buses())
    j["buses"].push_back({{"id", b.id},
                          {"subgrid", b.subgrid == Subgrid::kAc ? "ac" : "dc"},
                          {"v_min", b.v_min},
                          {"v_max", b.v_max},
                          {"peak_active_load_kw", b.peak_active_load},
                          {"peak_reactive_load_kvar", b.peak_reactive_load}});
  j["lines"] = json::array();
  for (const auto& l : net.lines())
    j["lines"].push_back({{"from_bus", l.from_bus},
                          {"to_bus", l.to_bus},
                          {"resistance_pu", l.resistance},
                          {"reactance_pu", l.reactance},
                          {"capacity_kw", l.capacity}});
  j["dg_units"] = json::array();
  for (const auto& u : net.units())
    j["dg_units"].push_back({{"id", u.id},
                             {"name", u.name},
                             {"bus", u.bus},
                             {"kind", to_string(u.kind)},
                             {"dispatchable", u.dispatchable},
                             {"p_min_kw", u.p_min},
                             {"p_max_kw", u.p_max},
                             {"energy_cost", u.energy_cost},
                             {"startup_cost", u.startup_cost},
                             {"shutdown_cost", u.shutdown_cost},
                             {"ramp_up_kw_per_h", u.ramp_up},
                             {"ramp_down_kw_per_h", u.ramp_down},
                             {"capacity_kw", u.capacity}});
  const auto& c = net.converter();
  j["converter"] = {{"p_min_kw", c.p_min}, {"p_max_kw", c.p_max}, {"ac_bus", c.ac_bus}, {"dc_bus", c.dc_bus}};
  return j;
}

inline Network network_from_json(const nlohmann::json& j) {
  try {
    std::vector<Bus> buses;
    for (const auto& b : j.at("buses"))
      buses.push_back({b.at("id").get<int>(), detail::subgrid_from(b.at("subgrid").get<std::string>()),
                       b.value("v_min", 0.9), b.value("v_max", 1.1), b.value("peak_active_load_kw", 0.0),
                       b.value("peak_reactive_load_kvar", 0.0)});
    std::vector<Line> lines;
    for (const auto& l : j.at("lines"))
      lines.push_back({l.at("from_bus").get<int>(), l.at("to_bus").get<int>(), l.at("resistance_pu").get<double>(),
                       l.at("reactance_pu").get<double>(), l.at("capacity_kw").get<double>()});
    std::vector<DGUnit> units;
    for (const auto& u : j.at("dg_units")) {
      DGUnit d;
      d.id = u.at("id").get<int>();
      d.name = u.value("name", std::string{});
      d.bus = u.at("bus").get<int>();
      d.kind = detail::kind_from(u.at("kind").get<std::string>());
      d.dispatchable = u.value("dispatchable", !is_renewable(d.kind));
      d.p_min = u.value("p_min_kw", 0.0);
      d.p_max = u.at("p_max_kw").get<double>();
      d.energy_cost = u.value("energy_cost", 0.0);
      d.startup_cost = u.value("startup_cost", 0.0);
      d.shutdown_cost = u.value("shutdown_cost", 0.0);
      d.ramp_up = u.value("ramp_up_kw_per_h", 0.0);
      d.ramp_down = u.value("ramp_down_kw_per_h", 0.0);
      d.capacity = u.value("capacity_kw", d.p_max);
      units.push_back(std::move(d));
    }
    const auto& c = j.at("converter");
    Converter conv{c.at("p_min_kw").get<double>(), c.at("p_max_kw").get<double>(), c.at("ac_bus").get<int>(),
                   c.at("dc_bus").get<int>()};
    return Network(j.value("name", std::string("network")), std::move(buses), std::move(lines), std::move(units),
                   conv, j.value("slack_bus", 1), j.value("base_kva", 1000.0));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("network: ") + e.what());
  }
}

inline Network load_network(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("network: ") + e.what());
  }
  return network_from_json(j);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace hmg
