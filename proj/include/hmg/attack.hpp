#pragma once

// False-data injection on meter readings and the operator's response to it:
// ramp-limited redispatch, emergency shutdown, and the load shedding that
// follows once the true balance is restored in real time.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "hmg/grid_model.hpp"
#include "hmg/powerflow.hpp"
#include "hmg/scheduler.hpp"

namespace hmg::attack {

enum class Direction { kReduce, kInflate };

inline const char* to_string(Direction d) { return d == Direction::kReduce ? "reduce" : "inflate"; }

struct AttackSpec {
  std::vector<int> targets;  // bus ids
  int start_hour = 1;        // 1-based
  int duration_hours = 1;
  double severity = 0.0;  // rho
  Direction direction = Direction::kReduce;

  void validate() const {
    if (!(severity >= 0.0 && severity <= 1.0)) throw ValidationError("attack: severity must lie in [0,1]");
    if (start_hour < 1) throw ValidationError("attack: start_hour is 1-based");
    if (duration_hours < 0) throw ValidationError("attack: negative duration");
  }
  void validate(const Network& net) const {
    validate();
    for (int b : targets)
      if (!net.has_bus(b)) throw ValidationError("attack: target bus " + std::to_string(b) + " not in network");
  }
  /// Whether the attack is live at a 0-based hour index.
  bool active(std::size_t hour) const {
    const auto h = static_cast<long>(hour) + 1;
    return h >= start_hour && h < start_hour + duration_hours;
  }
  bool targets_bus(int id) const { return std::find(targets.begin(), targets.end(), id) != targets.end(); }
  double factor() const { return direction == Direction::kReduce ? 1.0 - severity : 1.0 + severity; }
};

inline nlohmann::json to_json(const AttackSpec& s) {
  return {{"targets", s.targets},
          {"start_hour", s.start_hour},
          {"duration", s.duration_hours},
          {"severity", s.severity},
          {"direction", to_string(s.direction)}};
}

inline AttackSpec attack_spec_from_json(const nlohmann::json& j) {
  try {
    AttackSpec s;
    s.targets = j.at("targets").get<std::vector<int>>();
    s.start_hour = j.at("start_hour").get<int>();
    s.duration_hours = j.at("duration").get<int>();
    s.severity = j.at("severity").get<double>();
    const auto dir = j.value("direction", std::string("reduce"));
    if (dir == "reduce")
      s.direction = Direction::kReduce;
    else if (dir == "inflate")
      s.direction = Direction::kInflate;
    else
      throw ParseError("attack spec: direction must be 'reduce' or 'inflate'");
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("attack spec: ") + e.what());
  }
}

inline AttackSpec load_attack_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  try {
    return attack_spec_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

/// Hourly active-power readings, one column per metered bus.
struct MeterReadings {
  std::vector<int> bus_ids;
  std::vector<std::vector<double>> kw;  // [hour][meter]

  std::size_t hours() const { return kw.size(); }
  double total(std::size_t hour) const { return std::accumulate(kw[hour].begin(), kw[hour].end(), 0.0); }
};

/// What the meters would report with no tampering: every loaded ac bus and
/// every dc bus.
inline MeterReadings true_readings(const Network& net, const Scenario& sc) {
  MeterReadings r;
  std::vector<std::size_t> pos;
  for (std::size_t b = 0; b < net.buses().size(); ++b) {
    const auto& bus = net.buses()[b];
    if (bus.subgrid == Subgrid::kDc || bus.peak_active_load > 0.0) {
      r.bus_ids.push_back(bus.id);
      pos.push_back(b);
    }
  }
  r.kw.assign(sc.horizon(), std::vector<double>(pos.size()));
  for (std::size_t t = 0; t < sc.horizon(); ++t)
    for (std::size_t j = 0; j < pos.size(); ++j) r.kw[t][j] = bus_load(net, pos[j], t, sc).p;
  return r;
}

/// Targeted meters report m(1-rho) or m(1+rho) inside the attack window.
inline MeterReadings inject(const MeterReadings& truth, const AttackSpec& spec) {
  spec.validate();
  MeterReadings out = truth;
  for (std::size_t t = 0; t < out.hours(); ++t) {
    if (!spec.active(t)) continue;
    for (std::size_t j = 0; j < out.bus_ids.size(); ++j)
      if (spec.targets_bus(out.bus_ids[j])) out.kw[t][j] *= spec.factor();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Operator response

struct UnitState {
  int id = 0;
  double output = 0.0;  // kW
  double p_min = 0.0;
  double p_max = 0.0;
  double ramp_up = 0.0;    // kW reachable upward this hour
  double ramp_down = 0.0;  // kW reachable downward this hour
  bool committed = true;
  bool can_start = false;  // offline and past any minimum-down time
};

struct Response {
  std::vector<double> redispatch;  // kW per unit, ramping only
  std::vector<int> shutdowns;      // unit ids
  std::vector<int> startups;
  double ramped = 0.0;    // total kW moved by ramping, signed like the imbalance
  double residual = 0.0;  // imbalance left after all actions, + excess
};

/// Index of the candidate whose value is closest to `target`; ties go to the
/// lower unit id. Returns npos when there is no candidate.
inline std::size_t closest_unit(std::span<const UnitState> units, std::span<const double> values, double target,
                                std::span<const char> eligible) {
  std::size_t best = std::numeric_limits<std::size_t>::max();
  for (std::size_t k = 0; k < units.size(); ++k) {
    if (!eligible[k]) continue;
    if (best == std::numeric_limits<std::size_t>::max()) {
      best = k;
      continue;
    }
    const double d = std::abs(values[k] - target), db = std::abs(values[best] - target);
    if (d < db || (d == db && units[k].id < units[best].id)) best = k;
  }
  return best;
}

/// Reaction to an observed imbalance (+ excess generation, - deficit): ramp
/// every committed unit pro rata to its reachable range, then, if that is not
/// enough, switch one unit off (excess) or on (deficit), picking the unit whose
/// output is closest to what is left.
inline Response operator_response(std::span<const UnitState> units, double observed_imbalance,
                                  double tolerance = 1e-6) {
  const std::size_t n = units.size();
  Response r;
  r.redispatch.assign(n, 0.0);
  r.residual = observed_imbalance;
  if (std::abs(observed_imbalance) <= tolerance) return r;
  const bool excess = observed_imbalance > 0.0;
  std::vector<double> room(n, 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& u = units[k];
    if (!u.committed) continue;
    room[k] = excess ? std::min(u.ramp_down, u.output - u.p_min) : std::min(u.ramp_up, u.p_max - u.output);
    room[k] = std::max(0.0, room[k]);
    total += room[k];
  }
  const double need = std::abs(observed_imbalance);
  const double share = total > 0.0 ? std::min(1.0, need / total) : 0.0;
  std::vector<double> after(n);
  for (std::size_t k = 0; k < n; ++k) {
    r.redispatch[k] = (excess ? -1.0 : 1.0) * room[k] * share;
    after[k] = units[k].output + r.redispatch[k];
  }
  const double moved = total * share;
  r.ramped = excess ? moved : -moved;
  double left = need - moved;
  if (left <= tolerance) {
    r.residual = excess ? left : -left;
    return r;
  }
  std::vector<char> eligible(n, 0);
  std::vector<double> value(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    if (excess) {
      eligible[k] = units[k].committed && after[k] > 0.0;
      value[k] = after[k];
    } else {
      const double first = std::min(units[k].p_max, units[k].ramp_up);
      eligible[k] = !units[k].committed && units[k].can_start && first > 0.0 && first >= units[k].p_min;
      value[k] = first;
    }
  }
  const auto pick = closest_unit(units, value, left, eligible);
  if (pick != std::numeric_limits<std::size_t>::max()) {
    if (excess) {
      r.shutdowns.push_back(units[pick].id);
      left -= after[pick];
    } else {
      const double out = std::max(units[pick].p_min, std::min(value[pick], left));
      r.startups.push_back(units[pick].id);
      r.redispatch[pick] = out;
      left -= out;
    }
  }
  r.residual = excess ? left : -left;
  return r;
}

// ---------------------------------------------------------------------------
// Scenario run

struct AttackParams {
  int restart_delay_hours = 1;  // offline hours counting the hour of the shutdown
  double balance_tolerance_kw = 0.01;
  int max_balance_iterations = 200;
  InitialState initial;
  PowerFlowOptions power_flow;
};

struct HourImpact {
  std::size_t hour = 0;  // 1-based
  double true_demand_kw = 0.0;
  double observed_demand_kw = 0.0;
  double observed_imbalance_kw = 0.0;  // + excess as seen by the operator
  std::vector<double> redispatch_kw;   // per schedule unit
  std::vector<int> shutdowns;
  std::vector<int> startups;
  double load_shed_kw = 0.0;
  std::vector<double> p_g;  // settled output per schedule unit
  std::vector<int> u;
  double p_conv = 0.0;
  std::vector<double> res_kw;  // per renewable unit, after curtailment
  double curtailed_kw = 0.0;
  double generation_kw = 0.0;
  double loss_kw = 0.0;
  double balance_residual_kw = 0.0;  // generation - demand - loss + shed
};

struct ImpactReport {
  std::vector<int> unit_ids;  // schedule column order
  std::vector<int> res_ids;
  std::vector<HourImpact> hours;
  Schedule dispatched;
  double shed_kwh = 0.0;
  double ens_cost = 0.0;
  double operation_cost = 0.0;  // generation, start-up and shut-down
  double total_cost = 0.0;      // operation + ENS
};

namespace detail {

// Settles one hour against the true loads: units move within their bands in
// merit order, the converter carries the dc surplus, and whatever cannot be
// served is shed pro rata (ac and dc separately). Surplus that units cannot
// absorb is curtailed from renewables.
class RealTimeBalance {
 public:
  RealTimeBalance(const Network& net, const Scenario& sc, std::size_t t, const Schedule& s,
                  const AttackParams& params)
      : net_(net), sc_(sc), t_(t), s_(s), params_(params) {
    for (int id : s.unit_ids) {
      const auto& unit = net.units()[net.unit_index(id)];
      dc_.push_back(net.bus(unit.bus).subgrid == Subgrid::kDc);
      cost_.push_back(unit.energy_cost);
    }
    order_.resize(s.units());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::stable_sort(order_.begin(), order_.end(), [&](auto a, auto b) {
      return cost_[a] != cost_[b] ? cost_[a] < cost_[b] : s.unit_ids[a] < s.unit_ids[b];
    });
    for (std::size_t b = 0; b < net.buses().size(); ++b)
      if (net.buses()[b].subgrid == Subgrid::kAc) ac_load_ += bus_load(net, b, t, sc).p;
    for (const auto& unit : net.units()) {
      if (unit.dispatchable) continue;
      (net.bus(unit.bus).subgrid == Subgrid::kDc ? dc_res_ : ac_res_) += res_output(unit, t, sc);
    }
    dc_load_ = dc_demand(net, t, sc);
  }

  struct Result {
    std::vector<double> x;
    double p_conv = 0.0;
    double shed_ac = 0.0, shed_dc = 0.0;
    double cur_ac = 0.0, cur_dc = 0.0;  // fractions of renewable output curtailed
    PowerFlowResult pf;
  };

  Result settle(std::vector<double> x, const std::vector<double>& lo, const std::vector<double>& hi) const {
    Result r;
    const auto& conv = net_.converter();
    const double tol = params_.balance_tolerance_kw;
    double f_ac = 0.0, shed_dc = 0.0, cur_ac = 0.0, cur_dc = 0.0, p_conv = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = std::clamp(x[k], lo[k], hi[k]);

    auto dc_gen = [&] {
      double g = dc_res_ * (1.0 - cur_dc);
      for (std::size_t k = 0; k < x.size(); ++k)
        if (dc_[k]) g += x[k];
      return g;
    };
    // Moves units of one side (or both) by up to `amount` (sign = direction)
    // in merit order; returns the part that could not be moved.
    auto move = [&](double amount, int side, double dc_cap) {
      const bool up = amount > 0.0;
      double left = std::abs(amount);
      for (std::size_t i = 0; i < order_.size() && left > 0.0; ++i) {
        const std::size_t k = up ? order_[i] : order_[order_.size() - 1 - i];
        if (side == 0 && dc_[k]) continue;
        if (side == 1 && !dc_[k]) continue;
        double room = up ? hi[k] - x[k] : x[k] - lo[k];
        if (dc_[k] && side != 1) room = std::min(room, dc_cap);
        room = std::max(0.0, std::min(room, left));
        x[k] += up ? room : -room;
        if (dc_[k] && side != 1) dc_cap -= room;
        left -= room;
      }
      return left;
    };

    for (int it = 0; it < params_.max_balance_iterations; ++it) {
      const double need_dc = dc_load_ - shed_dc;
      p_conv = std::clamp(need_dc - dc_gen(), conv.p_min, conv.p_max);
      const double dc_gap = need_dc - dc_gen() - p_conv;
      if (dc_gap > tol) {
        double left = dc_gap;
        if (cur_dc > 0.0 && dc_res_ > 0.0) {
          const double back = std::min(left, cur_dc * dc_res_);
          cur_dc -= back / dc_res_;
          left -= back;
        }
        left = move(left, 1, 0.0);
        shed_dc = std::min(dc_load_, shed_dc + left);
        continue;
      }
      if (dc_gap < -tol) {
        double left = -dc_gap;
        const double back = std::min(left, shed_dc);
        shed_dc -= back;
        left -= back;
        left = move(-left, 1, 0.0);
        if (left > 0.0 && dc_res_ > 0.0) cur_dc = std::min(1.0, cur_dc + left / dc_res_);
        continue;
      }
      auto inj = injections(x, p_conv, f_ac, cur_ac);
      r.pf = solve_radial(net_, inj, params_.power_flow);
      if (!r.pf.converged) break;
      const double m = r.pf.slack_p;
      if (std::abs(m) <= tol) break;
      if (m > 0.0) {
        double left = m;
        if (cur_ac > 0.0 && ac_res_ > 0.0) {
          const double back = std::min(left, cur_ac * ac_res_);
          cur_ac -= back / ac_res_;
          left -= back;
        }
        left = move(left, 2, std::max(0.0, p_conv - conv.p_min));
        if (left > 0.0 && ac_load_ > 0.0) f_ac = std::min(1.0, f_ac + left / ac_load_);
      } else {
        double left = -m;
        if (f_ac > 0.0) {
          const double back = std::min(left, f_ac * ac_load_);
          f_ac -= back / ac_load_;
          left -= back;
        }
        left = move(-left, 2, std::max(0.0, conv.p_max - p_conv));
        if (left > 0.0 && ac_res_ > 0.0) cur_ac = std::min(1.0, cur_ac + left / ac_res_);
      }
    }
    r.x = x;
    r.p_conv = p_conv;
    r.shed_ac = f_ac * ac_load_;
    r.shed_dc = shed_dc;
    r.cur_ac = cur_ac;
    r.cur_dc = cur_dc;
    return r;
  }

  std::vector<Injection> injections(const std::vector<double>& x, double p_conv, double f_ac, double cur_ac) const {
    auto inj = hour_injections(net_, sc_, t_, s_.unit_ids, x, p_conv);
    for (std::size_t b = 0; b < inj.size(); ++b) {
      if (net_.buses()[b].subgrid != Subgrid::kAc) continue;
      const auto load = bus_load(net_, b, t_, sc_);
      inj[b].p_kw += f_ac * load.p;
      inj[b].q_kvar += f_ac * load.q;
    }
    for (const auto& unit : net_.units())
      if (!unit.dispatchable && net_.bus(unit.bus).subgrid == Subgrid::kAc)
        inj[net_.bus_index(unit.bus)].p_kw -= cur_ac * res_output(unit, t_, sc_);
    return inj;
  }

  double ac_res() const { return ac_res_; }
  double dc_res() const { return dc_res_; }

 private:
  const Network& net_;
  const Scenario& sc_;
  std::size_t t_;
  const Schedule& s_;
  const AttackParams& params_;
  std::vector<char> dc_;
  std::vector<double> cost_;
  std::vector<std::size_t> order_;
  double ac_load_ = 0.0, dc_load_ = 0.0, ac_res_ = 0.0, dc_res_ = 0.0;
};

}  // namespace detail

/// Hour by hour: the operator sees the tampered meters and reacts to the
/// unpredicted change; the hour then settles against the true loads with
/// units held to their hourly ramp bands, and any shortfall is shed. A unit
/// tripped by the operator stays off for `restart_delay_hours` (counting the
/// trip hour) and then ramps up from zero.
inline ImpactReport run_attack_scenario(const Scenario& sc, const Network& net, const Schedule& schedule,
                                        const AttackSpec& spec, const AttackParams& params = {}) {
  schedule.validate();
  spec.validate(net);
  if (schedule.horizon() != sc.horizon()) throw ContractViolation("run_attack_scenario: schedule horizon differs");
  if (params.restart_delay_hours < 1) throw ContractViolation("run_attack_scenario: restart delay must be >= 1 hour");
  const std::size_t n = schedule.units(), H = sc.horizon();
  const auto units = schedule_units(net, schedule);
  if (!params.initial.p.empty() && params.initial.p.size() != n)
    throw ContractViolation("run_attack_scenario: initial output has wrong length");

  const auto truth = true_readings(net, sc);
  const auto seen = inject(truth, spec);

  ImpactReport rep;
  rep.unit_ids = schedule.unit_ids;
  for (const auto& unit : net.units())
    if (!unit.dispatchable) rep.res_ids.push_back(unit.id);
  rep.dispatched = Schedule::zeros(net, 0);
  rep.dispatched.unit_ids = schedule.unit_ids;

  std::vector<long> down_until(n, -1);  // first 0-based hour the unit may run again
  std::vector<char> forced_on(n, 0);    // started by the operator
  std::vector<double> prev(n, 0.0);
  std::vector<int> prev_u(n, 1);
  const bool have_prev0 = !params.initial.p.empty();
  if (have_prev0) prev = params.initial.p;
  if (!params.initial.u.empty()) prev_u = params.initial.u;

  for (std::size_t t = 0; t < H; ++t) {
    const bool free_ramp = t == 0 && !have_prev0;
    std::vector<double> lo(n), hi(n), x0(n);
    std::vector<int> committed(n);
    for (std::size_t k = 0; k < n; ++k) {
      const auto& unit = units[k];
      if (static_cast<long>(t) < down_until[k]) {
        committed[k] = 0;
        continue;
      }
      const double base = prev_u[k] ? prev[k] : 0.0;
      double l = free_ramp ? unit.p_min : std::max(unit.p_min, base - unit.ramp_down);
      double h = free_ramp ? unit.p_max : std::min(unit.p_max, base + unit.ramp_up);
      const bool must_stay = !free_ramp && base - unit.ramp_down > 0.0;
      committed[k] = schedule.u[t][k] || forced_on[k] || must_stay;
      if (!committed[k]) continue;
      l = std::min(l, h);
      lo[k] = l;
      hi[k] = h;
      x0[k] = std::clamp(schedule.u[t][k] ? schedule.p_g[t][k] : 0.0, l, h);
    }

    HourImpact hr;
    hr.hour = t + 1;
    hr.true_demand_kw = truth.total(t);
    hr.observed_demand_kw = seen.total(t);
    double planned_shift = 0.0;
    for (std::size_t k = 0; k < n; ++k) planned_shift += x0[k] - schedule.u[t][k] * schedule.p_g[t][k];
    hr.observed_imbalance_kw = planned_shift + (hr.true_demand_kw - hr.observed_demand_kw);

    std::vector<UnitState> state(n);
    for (std::size_t k = 0; k < n; ++k) {
      const auto& unit = units[k];
      state[k] = {unit.id,
                  x0[k],
                  unit.p_min,
                  unit.p_max,
                  committed[k] ? std::min(unit.ramp_up, hi[k] - x0[k]) : unit.ramp_up,
                  committed[k] ? std::min(unit.ramp_down, x0[k] - lo[k]) : 0.0,
                  committed[k] != 0,
                  !committed[k] && static_cast<long>(t) >= down_until[k]};
    }
    const auto resp = operator_response(state, hr.observed_imbalance_kw, params.balance_tolerance_kw);
    hr.redispatch_kw = resp.redispatch;
    hr.shutdowns = resp.shutdowns;
    hr.startups = resp.startups;

    std::vector<double> x1(n);
    for (std::size_t k = 0; k < n; ++k) x1[k] = x0[k] + resp.redispatch[k];
    for (int id : resp.shutdowns) {
      const auto k = static_cast<std::size_t>(
          std::find(schedule.unit_ids.begin(), schedule.unit_ids.end(), id) - schedule.unit_ids.begin());
      committed[k] = 0;
      forced_on[k] = 0;
      down_until[k] = static_cast<long>(t) + params.restart_delay_hours;
      lo[k] = hi[k] = x1[k] = 0.0;
    }
    for (int id : resp.startups) {
      const auto k = static_cast<std::size_t>(
          std::find(schedule.unit_ids.begin(), schedule.unit_ids.end(), id) - schedule.unit_ids.begin());
      committed[k] = 1;
      forced_on[k] = 1;
      lo[k] = std::min(units[k].p_min, x1[k]);
      hi[k] = std::min(units[k].p_max, units[k].ramp_up);
    }
    for (std::size_t k = 0; k < n; ++k)
      if (!committed[k]) lo[k] = hi[k] = x1[k] = 0.0;

    const detail::RealTimeBalance balance(net, sc, t, schedule, params);
    const auto res = balance.settle(x1, lo, hi);
    hr.p_g = res.x;
    hr.u = committed;
    hr.p_conv = res.p_conv;
    hr.load_shed_kw = res.shed_ac + res.shed_dc;
    hr.loss_kw = res.pf.total_loss;
    hr.curtailed_kw = res.cur_ac * balance.ac_res() + res.cur_dc * balance.dc_res();
    double gen = 0.0;
    for (const auto& unit : net.units()) {
      if (unit.dispatchable) continue;
      const bool dc = net.bus(unit.bus).subgrid == Subgrid::kDc;
      const double out = res_output(unit, t, sc) * (1.0 - (dc ? res.cur_dc : res.cur_ac));
      hr.res_kw.push_back(out);
      gen += out;
    }
    for (double p : res.x) gen += p;
    hr.generation_kw = gen;
    hr.balance_residual_kw = gen - hr.true_demand_kw - hr.loss_kw + hr.load_shed_kw;

    rep.dispatched.p_g.push_back(res.x);
    rep.dispatched.u.push_back(committed);
    rep.dispatched.p_conv.push_back(res.p_conv);
    rep.shed_kwh += hr.load_shed_kw;
    prev = res.x;
    prev_u = committed;
    rep.hours.push_back(std::move(hr));
  }
  std::vector<int> u0 = params.initial.u;
  rep.operation_cost = operating_cost(rep.dispatched, units, u0);
  rep.ens_cost = rep.shed_kwh * sc.ens_penalty();
  rep.total_cost = rep.operation_cost + rep.ens_cost;
  return rep;
}

}  // namespace hmg::attack
