#pragma once

// Day-ahead commitment and dispatch of the islanded hybrid microgrid:
// operating cost, constraint evaluation, and a dragonfly-swarm optimizer
// over mixed continuous (output) and binary (commitment) dimensions.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "hmg/grid_model.hpp"
#include "hmg/powerflow.hpp"

namespace hmg {

enum class ConstraintClass : int { kDcBalance, kAcBalance, kCapacity, kReserve, kFeeder, kVoltage, kRamp };
inline constexpr std::size_t kConstraintClasses = 7;

inline const char* to_string(ConstraintClass c) {
  static constexpr const char* kNames[] = {"dc_balance", "ac_balance", "capacity", "reserve",
                                           "feeder",     "voltage",    "ramp"};
  return kNames[static_cast<int>(c)];
}

struct Violation {
  ConstraintClass constraint;
  std::size_t hour;   // 0-based
  double magnitude;   // kW, or pu for voltage
  int element = -1;   // unit id, bus id or line index; -1 for system-wide / converter
};

struct ViolationReport {
  std::vector<Violation> items;

  bool feasible() const { return items.empty(); }
  std::size_t count(ConstraintClass c) const {
    return static_cast<std::size_t>(
        std::count_if(items.begin(), items.end(), [c](const Violation& v) { return v.constraint == c; }));
  }
  double total(ConstraintClass c) const {
    double s = 0.0;
    for (const auto& v : items)
      if (v.constraint == c) s += v.magnitude;
    return s;
  }
};

/// Hourly dispatch of the dispatchable units (columns in `unit_ids` order)
/// plus the converter setpoint.
struct Schedule {
  std::vector<int> unit_ids;
  std::vector<std::vector<double>> p_g;  // [hour][unit] kW
  std::vector<std::vector<int>> u;       // [hour][unit] 0/1
  std::vector<double> p_conv;            // [hour] kW, positive ac -> dc

  static Schedule zeros(const Network& net, std::size_t horizon) {
    Schedule s;
    for (auto k : net.dispatchable_units()) s.unit_ids.push_back(net.units()[k].id);
    s.p_g.assign(horizon, std::vector<double>(s.unit_ids.size(), 0.0));
    s.u.assign(horizon, std::vector<int>(s.unit_ids.size(), 0));
    s.p_conv.assign(horizon, 0.0);
    return s;
  }
  std::size_t horizon() const { return p_g.size(); }
  std::size_t units() const { return unit_ids.size(); }

  void validate() const {
    if (u.size() != p_g.size() || p_conv.size() != p_g.size())
      throw ContractViolation("schedule: hour dimensions differ");
    for (std::size_t t = 0; t < p_g.size(); ++t) {
      if (p_g[t].size() != unit_ids.size() || u[t].size() != unit_ids.size())
        throw ContractViolation("schedule: unit dimensions differ at hour " + std::to_string(t + 1));
      for (std::size_t k = 0; k < unit_ids.size(); ++k) {
        if (u[t][k] != 0 && u[t][k] != 1) throw ContractViolation("schedule: commitment not binary");
        if (u[t][k] == 0 && p_g[t][k] != 0.0)
          throw ContractViolation("schedule: decommitted unit " + std::to_string(unit_ids[k]) + " has output");
      }
    }
  }
};

/// Commitment and output before the first hour. Empty vectors mean "all on"
/// and "unknown" (the first-hour ramp check is then skipped).
struct InitialState {
  std::vector<int> u;
  std::vector<double> p;
};

inline std::vector<DGUnit> schedule_units(const Network& net, const Schedule& s) {
  std::vector<DGUnit> out;
  for (int id : s.unit_ids) out.push_back(net.units()[net.unit_index(id)]);
  return out;
}

/// Energy cost of committed output plus start-up and shut-down charges.
inline double operating_cost(const Schedule& s, std::span<const DGUnit> units, std::span<const int> initial_u = {}) {
  if (units.size() != s.units()) throw ContractViolation("operating_cost: unit list does not match schedule");
  if (!initial_u.empty() && initial_u.size() != units.size())
    throw ContractViolation("operating_cost: initial commitment has wrong length");
  double cost = 0.0;
  for (std::size_t k = 0; k < units.size(); ++k) {
    int prev = initial_u.empty() ? 1 : initial_u[k];
    for (std::size_t t = 0; t < s.horizon(); ++t) {
      const int u = s.u[t][k];
      const double p = s.p_g[t][k];
      if (u == 1 && p < 0.0) throw ContractViolation("operating_cost: negative output of a committed unit");
      cost += u * p * units[k].energy_cost;
      cost += units[k].startup_cost * std::max(0, u - prev) + units[k].shutdown_cost * std::max(0, prev - u);
      prev = u;
    }
  }
  return cost;
}

struct EvaluationOptions {
  InitialState initial;
  double balance_tolerance_kw = 0.01;
  PowerFlowOptions power_flow;
  double divergence_magnitude = 1.0;  // pu recorded when the power flow fails
};

/// Nodal injections for one hour: bus loads, renewable output, dispatchable
/// output (in schedule column order), and the converter.
inline std::vector<Injection> hour_injections(const Network& net, const Scenario& sc, std::size_t t,
                                              std::span<const int> unit_ids, std::span<const double> p_g,
                                              double p_conv) {
  std::vector<Injection> inj(net.buses().size());
  for (std::size_t b = 0; b < inj.size(); ++b) {
    if (net.buses()[b].subgrid != Subgrid::kAc) continue;
    const auto load = bus_load(net, b, t, sc);
    inj[b] = {-load.p, -load.q};
  }
  for (const auto& unit : net.units())
    if (!unit.dispatchable && net.bus(unit.bus).subgrid == Subgrid::kAc)
      inj[net.bus_index(unit.bus)].p_kw += res_output(unit, t, sc);
  for (std::size_t k = 0; k < unit_ids.size(); ++k) {
    const auto& unit = net.units()[net.unit_index(unit_ids[k])];
    if (net.bus(unit.bus).subgrid == Subgrid::kAc) inj[net.bus_index(unit.bus)].p_kw += p_g[k];
  }
  inj[net.bus_index(net.converter().ac_bus)].p_kw -= p_conv;
  return inj;
}

/// Total renewable output on the dc side.
inline double dc_res_output(const Network& net, const Scenario& sc, std::size_t t) {
  double s = 0.0;
  for (const auto& unit : net.units())
    if (!unit.dispatchable && net.bus(unit.bus).subgrid == Subgrid::kDc) s += res_output(unit, t, sc);
  return s;
}

inline double res_capacity(const Network& net) {
  double s = 0.0;
  for (const auto& unit : net.units())
    if (!unit.dispatchable) s += unit.capacity;
  return s;
}

namespace detail {

/// All constraint checks for one hour given its solved power flow.
inline void check_hour(const Network& net, const Scenario& sc, const Schedule& s, std::size_t t,
                       const PowerFlowResult& pf, const EvaluationOptions& opt, std::vector<Violation>& out) {
  const auto& conv = net.converter();
  double dc_gen = dc_res_output(net, sc, t);
  double committed = res_capacity(net);
  for (std::size_t k = 0; k < s.units(); ++k) {
    const auto& unit = net.units()[net.unit_index(s.unit_ids[k])];
    const double p = s.p_g[t][k];
    const int u = s.u[t][k];
    if (u == 1) {
      if (p > unit.p_max) out.push_back({ConstraintClass::kCapacity, t, p - unit.p_max, unit.id});
      if (p < unit.p_min) out.push_back({ConstraintClass::kCapacity, t, unit.p_min - p, unit.id});
      committed += unit.p_max;
    } else if (p != 0.0) {
      out.push_back({ConstraintClass::kCapacity, t, std::abs(p), unit.id});
    }
    if (net.bus(unit.bus).subgrid == Subgrid::kDc) dc_gen += u * p;
    std::optional<double> prev;
    if (t > 0)
      prev = s.u[t - 1][k] * s.p_g[t - 1][k];
    else if (!opt.initial.p.empty())
      prev = opt.initial.p[k];
    if (prev) {
      const double d = u * p - *prev;
      if (d > unit.ramp_up) out.push_back({ConstraintClass::kRamp, t, d - unit.ramp_up, unit.id});
      if (-d > unit.ramp_down) out.push_back({ConstraintClass::kRamp, t, -d - unit.ramp_down, unit.id});
    }
  }
  const double pc = s.p_conv[t];
  if (pc > conv.p_max) out.push_back({ConstraintClass::kCapacity, t, pc - conv.p_max, -1});
  if (pc < conv.p_min) out.push_back({ConstraintClass::kCapacity, t, conv.p_min - pc, -1});
  const double dc_mis = std::abs(dc_gen + pc - dc_demand(net, t, sc));
  if (dc_mis > opt.balance_tolerance_kw) out.push_back({ConstraintClass::kDcBalance, t, dc_mis, -1});

  if (!pf.converged) {
    out.push_back({ConstraintClass::kVoltage, t, opt.divergence_magnitude, -1});
    return;
  }
  if (std::abs(pf.slack_p) > opt.balance_tolerance_kw)
    out.push_back({ConstraintClass::kAcBalance, t, std::abs(pf.slack_p), net.slack_bus()});
  const double need = ac_demand(net, t, sc) + dc_demand(net, t, sc) + pf.total_loss + reserve_requirement(net, t, sc);
  if (committed < need) out.push_back({ConstraintClass::kReserve, t, need - committed, -1});
  for (const auto& lv : check_limits(net, pf)) {
    const auto cls = lv.kind == LimitKind::kFeeder ? ConstraintClass::kFeeder : ConstraintClass::kVoltage;
    out.push_back({cls, t, lv.magnitude, lv.element});
  }
}

}  // namespace detail

/// Runs the power flow for every hour of the schedule and reports each
/// violated constraint. Optionally returns the hourly power-flow results.
inline ViolationReport evaluate_constraints(const Schedule& s, const Scenario& sc, const Network& net,
                                            const EvaluationOptions& opt = {},
                                            std::vector<PowerFlowResult>* flows = nullptr) {
  s.validate();
  if (s.horizon() != sc.horizon()) throw ContractViolation("evaluate_constraints: schedule horizon differs");
  ViolationReport report;
  if (flows) flows->clear();
  for (std::size_t t = 0; t < s.horizon(); ++t) {
    const auto inj = hour_injections(net, sc, t, s.unit_ids, s.p_g[t], s.p_conv[t]);
    const auto pf = solve_radial(net, inj, opt.power_flow);
    detail::check_hour(net, sc, s, t, pf, opt, report.items);
    if (flows) flows->push_back(pf);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Dragonfly swarm

struct Dragonfly {
  std::vector<double> x;   // position
  std::vector<double> dx;  // step
};

struct SearchSpace {
  std::vector<double> lb, ub;
  std::vector<bool> binary;
  std::size_t dims() const { return lb.size(); }
};

/// Swarm weights for one iteration: separation, alignment, cohesion, food
/// attraction, enemy distraction, inertia, and the neighbourhood radius in
/// normalized RMS distance.
struct StepCoefficients {
  double s = 0, a = 0, c = 0, f = 0, e = 0, w = 0;
  double radius = 0;
};

struct DragonflyWeights {
  double separation = 1.0, alignment = 1.0, cohesion = 1.0, food = 1.0, enemy = 1.0;
  double inertia_start = 0.9, inertia_end = 0.4;
};

/// Adaptive coefficient schedule of the original algorithm, scaled by the
/// configured weights.
template <class Rng>
StepCoefficients step_coefficients(const DragonflyWeights& w, int iter, int max_iter, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double frac = max_iter > 1 ? static_cast<double>(iter) / (max_iter - 1) : 1.0;
  const double my = std::max(0.0, 0.1 - 0.2 * frac);
  StepCoefficients k;
  k.w = w.inertia_start - (w.inertia_start - w.inertia_end) * frac;
  k.s = w.separation * 2.0 * u(rng) * my;
  k.a = w.alignment * 2.0 * u(rng) * my;
  k.c = w.cohesion * 2.0 * u(rng) * my;
  k.f = w.food * 2.0 * u(rng);
  k.e = w.enemy * my;
  k.radius = 0.25 + 2.0 * frac;
  return k;
}

/// One swarm update. Food and enemy default to the best and worst individual
/// by fitness (ties: lowest index). Continuous dimensions move by the step and
/// are clamped to bounds; binary dimensions flip with probability
/// |d / sqrt(1 + d^2)| of their step d.
template <class Rng>
std::vector<Dragonfly> dragonfly_step(const std::vector<Dragonfly>& pop, std::span<const double> fitness,
                                      const SearchSpace& space, const StepCoefficients& k, Rng& rng,
                                      const std::vector<double>* food = nullptr,
                                      const std::vector<double>* enemy = nullptr) {
  if (pop.empty()) throw ContractViolation("dragonfly_step: empty population");
  if (fitness.size() != pop.size()) throw ContractViolation("dragonfly_step: one fitness value per individual");
  const std::size_t n = pop.size(), d = space.dims();
  for (const auto& ind : pop)
    if (ind.x.size() != d || ind.dx.size() != d) throw ContractViolation("dragonfly_step: dimension mismatch");
  std::size_t best = 0, worst = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (fitness[i] < fitness[best]) best = i;
    if (fitness[i] > fitness[worst]) worst = i;
  }
  const auto& fx = food ? *food : pop[best].x;
  const auto& ex = enemy ? *enemy : pop[worst].x;

  std::vector<double> span(d);
  for (std::size_t j = 0; j < d; ++j) span[j] = std::max(space.ub[j] - space.lb[j], 1e-12);
  auto distance = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double z = (a[j] - b[j]) / span[j];
      s += z * z;
    }
    return std::sqrt(s / static_cast<double>(d));
  };

  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<Dragonfly> next = pop;
  std::vector<double> sep(d), ali(d), coh(d);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(sep.begin(), sep.end(), 0.0);
    std::fill(ali.begin(), ali.end(), 0.0);
    std::fill(coh.begin(), coh.end(), 0.0);
    std::size_t neighbours = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || distance(pop[i].x, pop[j].x) > k.radius) continue;
      ++neighbours;
      for (std::size_t m = 0; m < d; ++m) {
        sep[m] -= pop[i].x[m] - pop[j].x[m];
        ali[m] += pop[j].dx[m];
        coh[m] += pop[j].x[m];
      }
    }
    auto& out = next[i];
    for (std::size_t m = 0; m < d; ++m) {
      double step = k.w * pop[i].dx[m];
      if (neighbours) {
        const double nb = static_cast<double>(neighbours);
        step += k.s * sep[m] + k.a * ali[m] / nb + k.c * (coh[m] / nb - pop[i].x[m]);
      }
      step += k.f * (fx[m] - pop[i].x[m]) + k.e * (pop[i].x[m] - ex[m]);
      if (space.binary[m]) {
        step = std::clamp(step, -6.0, 6.0);
        out.dx[m] = step;
        const double flip = std::abs(step / std::sqrt(1.0 + step * step));
        if (flip > 0.0 && u01(rng) < flip) out.x[m] = 1.0 - std::round(pop[i].x[m]);
      } else {
        const double lim = span[m] / 10.0;
        step = std::clamp(step, -lim, lim);
        out.dx[m] = step;
        out.x[m] = std::clamp(pop[i].x[m] + step, space.lb[m], space.ub[m]);
      }
    }
  }
  return next;
}

// ---------------------------------------------------------------------------
// Optimizer

struct OptimizerConfig {
  int population_size = 30;
  int iterations = 200;
  std::uint64_t seed = 1;
  int threads = 1;
  std::array<double, kConstraintClasses> penalty_weights = {1e4, 1e4, 1e4, 1e4, 1e4, 1e4, 1e4};
  DragonflyWeights dragonfly;
  EvaluationOptions evaluation;
  int balance_iterations = 12;

  void validate() const {
    if (population_size < 2) throw ValidationError("optimizer: population_size must be at least 2");
    if (iterations < 0) throw ValidationError("optimizer: negative iteration count");
    for (double w : penalty_weights)
      if (w < 0.0) throw ValidationError("optimizer: negative penalty weight");
  }
};

inline double penalty(const ViolationReport& r, const OptimizerConfig& cfg) {
  double p = 0.0;
  for (const auto& v : r.items) p += cfg.penalty_weights[static_cast<int>(v.constraint)] * v.magnitude;
  return p;
}

/// Decision-vector decoding with repair. Each hour, commitments that would
/// break a ramp limit are forced, outputs are clamped into their ramp and
/// capacity window, the converter follows from the dc balance, and the
/// remaining mismatch (including losses from the power flow) is covered in
/// merit order. The repaired values are written back into the position.
class DispatchProblem {
 public:
  DispatchProblem(const Network& net, const Scenario& sc, const OptimizerConfig& cfg)
      : net_(net), sc_(sc), cfg_(cfg), units_(net.dispatchable_units()) {
    for (auto k : units_) {
      unit_ids_.push_back(net.units()[k].id);
      on_dc_.push_back(net.unit_subgrid(k) == Subgrid::kDc);
    }
    const auto nd = units_.size();
    const auto& init = cfg.evaluation.initial;
    if (!init.u.empty() && init.u.size() != nd) throw ValidationError("optimizer: initial commitment length");
    if (!init.p.empty() && init.p.size() != nd) throw ValidationError("optimizer: initial output length");
    order_.resize(nd);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::stable_sort(order_.begin(), order_.end(),
                     [&](std::size_t a, std::size_t b) { return unit(a).energy_cost < unit(b).energy_cost; });
    res_cap_ = res_capacity(net);
    for (std::size_t j = 0; j < dims(); ++j) {
      const bool bin = j >= p_dims();
      space_.binary.push_back(bin);
      space_.lb.push_back(bin ? 0.0 : 0.0);
      space_.ub.push_back(bin ? 1.0 : unit(j % nd).p_max);
    }
  }

  std::size_t dims() const { return 2 * p_dims(); }
  std::size_t p_dims() const { return sc_.horizon() * units_.size(); }
  const SearchSpace& space() const { return space_; }
  const DGUnit& unit(std::size_t k) const { return net_.units()[units_[k]]; }
  std::span<const int> unit_ids() const { return unit_ids_; }

  struct Evaluation {
    Schedule schedule;
    ViolationReport report;
    double cost = 0.0;
    double fitness = 0.0;
  };

  Evaluation evaluate(std::vector<double>& x) const {
    const auto nd = units_.size();
    const auto horizon = sc_.horizon();
    const auto& opt = cfg_.evaluation;
    Evaluation ev;
    ev.schedule = Schedule::zeros(net_, horizon);
    std::vector<double> prev_p(nd, 0.0);
    std::vector<int> prev_u(nd, 1);
    if (!opt.initial.u.empty()) prev_u = opt.initial.u;
    bool have_prev_p = !opt.initial.p.empty();
    if (have_prev_p) prev_p = opt.initial.p;
    double loss_est = 0.03 * ac_demand(net_, 0, sc_);
    std::vector<double> lo(nd), hi(nd), p(nd);
    std::vector<int> u(nd);
    Windows start{std::vector<double>(nd), std::vector<double>(nd), std::vector<bool>(nd)};

    for (std::size_t t = 0; t < horizon; ++t) {
      const double dc_net = dc_demand(net_, t, sc_) - dc_res_output(net_, sc_, t);
      double res_now = dc_res_output(net_, sc_, t);
      for (const auto& un : net_.units())
        if (!un.dispatchable && net_.bus(un.bus).subgrid == Subgrid::kAc) res_now += res_output(un, t, sc_);
      const double net_load = ac_demand(net_, t, sc_) + dc_demand(net_, t, sc_) - res_now;

      for (std::size_t k = 0; k < nd; ++k) {
        const auto& g = unit(k);
        bool want = x[p_dims() + t * nd + k] >= 0.5;
        const double was = prev_u[k] ? prev_p[k] : 0.0;
        double l = g.p_min, h = g.p_max;
        bool can_start = true;
        if (have_prev_p) {
          if (prev_u[k]) {
            l = std::max(l, was - g.ramp_down);
            h = std::min(h, was + g.ramp_up);
            if (!want && was > g.ramp_down) want = true;
          } else {
            h = std::min(h, g.ramp_up);
            can_start = l <= h;
          }
        }
        if (want && !can_start) want = false;
        u[k] = want ? 1 : 0;
        lo[k] = want ? l : 0.0;
        hi[k] = want ? h : 0.0;
        start.lo[k] = l;
        start.hi[k] = h;
        start.ok[k] = can_start;
        p[k] = want ? std::clamp(x[t * nd + k], l, h) : 0.0;
      }

      commit_for_capacity(t, loss_est, start, u, lo, hi, p);

      PowerFlowResult pf;
      double p_conv = 0.0;
      for (int it = 0; it < std::max(1, cfg_.balance_iterations); ++it) {
        allocate(net_load + loss_est, lo, hi, p);
        p_conv = settle_converter(dc_net, lo, hi, p);
        const auto inj = hour_injections(net_, sc_, t, unit_ids_, p, p_conv);
        pf = solve_radial(net_, inj, opt.power_flow);
        if (!pf.converged || std::abs(pf.slack_p) <= 0.25 * opt.balance_tolerance_kw) break;
        loss_est += pf.slack_p;
      }

      auto& s = ev.schedule;
      for (std::size_t k = 0; k < nd; ++k) {
        s.u[t][k] = u[k];
        s.p_g[t][k] = u[k] ? p[k] : 0.0;
        x[p_dims() + t * nd + k] = u[k];
        if (u[k]) x[t * nd + k] = p[k];
      }
      s.p_conv[t] = p_conv;
      detail::check_hour(net_, sc_, s, t, pf, opt, ev.report.items);
      if (pf.converged) loss_est = pf.total_loss;
      prev_p = s.p_g[t];
      prev_u = u;
      have_prev_p = true;
    }
    std::vector<DGUnit> us;
    for (std::size_t k = 0; k < nd; ++k) us.push_back(unit(k));
    ev.cost = operating_cost(ev.schedule, us, opt.initial.u);
    ev.fitness = ev.cost + penalty(ev.report, cfg_);
    return ev;
  }

 private:
  struct Windows {
    std::vector<double> lo, hi;
    std::vector<bool> ok;
  };

  // Commits further units (cheapest first) while the committed windows cannot
  // cover the demand or the committed capacity misses the reserve target.
  void commit_for_capacity(std::size_t t, double loss, const Windows& start, std::vector<int>& u,
                           std::vector<double>& lo, std::vector<double>& hi, std::vector<double>& p) const {
    double res_now = 0.0;
    for (const auto& un : net_.units())
      if (!un.dispatchable) res_now += res_output(un, t, sc_);
    const double demand = ac_demand(net_, t, sc_) + dc_demand(net_, t, sc_) + loss;
    const double need_reserve = demand + reserve_requirement(net_, t, sc_);
    for (auto k : order_) {
      double window = res_now, committed = res_cap_;
      for (std::size_t j = 0; j < u.size(); ++j) {
        window += hi[j];
        committed += u[j] * unit(j).p_max;
      }
      if (window >= demand && committed >= need_reserve) break;
      if (u[k] || !start.ok[k]) continue;
      u[k] = 1;
      lo[k] = start.lo[k];
      hi[k] = start.hi[k];
      p[k] = lo[k];
    }
  }

  // Moves the total dispatchable output toward `target` in merit order.
  void allocate(double target, const std::vector<double>& lo, const std::vector<double>& hi,
                std::vector<double>& p) const {
    double delta = target - std::accumulate(p.begin(), p.end(), 0.0);
    if (delta > 0.0) {
      for (auto k : order_) {
        const double m = std::min(delta, hi[k] - p[k]);
        if (m > 0.0) p[k] += m, delta -= m;
      }
    } else if (delta < 0.0) {
      for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
        const auto k = *it;
        const double m = std::min(-delta, p[k] - lo[k]);
        if (m > 0.0) p[k] -= m, delta += m;
      }
    }
  }

  // Keeps the dc-side output within the converter's transfer range by
  // trading output between dc and ac units; returns the converter setpoint.
  double settle_converter(double dc_net, const std::vector<double>& lo, const std::vector<double>& hi,
                          std::vector<double>& p) const {
    const auto& conv = net_.converter();
    double dc_sum = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k)
      if (on_dc_[k]) dc_sum += p[k];
    const double dc_hi = dc_net - conv.p_min;  // largest dc output the converter can export
    const double dc_lo = dc_net - conv.p_max;
    auto shift = [&](double amount, bool from_dc) {
      // Lower units on one side (expensive first), raise the other (cheap first).
      double down = 0.0;
      for (auto it = order_.rbegin(); it != order_.rend() && down < amount; ++it)
        if (on_dc_[*it] == from_dc) {
          const double m = std::min(amount - down, p[*it] - lo[*it]);
          if (m > 0.0) p[*it] -= m, down += m;
        }
      double up = 0.0;
      for (auto k : order_)
        if (on_dc_[k] != from_dc && up < down) {
          const double m = std::min(down - up, hi[k] - p[k]);
          if (m > 0.0) p[k] += m, up += m;
        }
      return std::pair{down, up};
    };
    if (dc_sum > dc_hi) {
      dc_sum -= shift(dc_sum - dc_hi, true).first;
    } else if (dc_sum < dc_lo) {
      double need = dc_lo - dc_sum;
      double ac_down = 0.0;
      for (auto it = order_.rbegin(); it != order_.rend() && ac_down < need; ++it)
        if (!on_dc_[*it]) {
          const double m = std::min(need - ac_down, p[*it] - lo[*it]);
          if (m > 0.0) p[*it] -= m, ac_down += m;
        }
      double dc_up = 0.0;
      for (auto k : order_)
        if (on_dc_[k] && dc_up < need) {
          const double m = std::min(need - dc_up, hi[k] - p[k]);
          if (m > 0.0) p[k] += m, dc_up += m;
        }
      dc_sum += dc_up;
    }
    return std::clamp(dc_net - dc_sum, conv.p_min, conv.p_max);
  }

  const Network& net_;
  const Scenario& sc_;
  const OptimizerConfig& cfg_;
  std::vector<std::size_t> units_;
  std::vector<int> unit_ids_;
  std::vector<bool> on_dc_;
  std::vector<std::size_t> order_;
  SearchSpace space_;
  double res_cap_ = 0.0;
};

struct OptimizeResult {
  Schedule schedule;
  double cost = 0.0;
  double fitness = 0.0;
  ViolationReport report;
  std::vector<double> best_history;  // best fitness after each iteration (index 0: initial swarm)
};

/// Dragonfly search over commitment and dispatch. Deterministic for a given
/// seed regardless of the number of evaluation threads.
inline OptimizeResult optimize(const Scenario& sc, const Network& net, const OptimizerConfig& cfg) {
  cfg.validate();
  if (net.dispatchable_units().empty()) throw ValidationError("optimizer: network has no dispatchable units");
  DispatchProblem problem(net, sc, cfg);
  const auto& space = problem.space();
  const std::size_t n = static_cast<std::size_t>(cfg.population_size), d = problem.dims();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  std::vector<Dragonfly> pop(n);
  for (std::size_t i = 0; i < n; ++i) {
    pop[i].x.resize(d);
    pop[i].dx.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
      const double r = u01(rng), r2 = u01(rng);
      if (space.binary[j]) {
        pop[i].x[j] = i == 0 ? 1.0 : (r < 0.5 ? 0.0 : 1.0);
        pop[i].dx[j] = 0.0;
      } else {
        pop[i].x[j] = i == 0 ? 0.5 * (space.lb[j] + space.ub[j]) : space.lb[j] + r * (space.ub[j] - space.lb[j]);
        pop[i].dx[j] = (r2 - 0.5) * (space.ub[j] - space.lb[j]) / 10.0;
      }
    }
  }

  std::vector<DispatchProblem::Evaluation> evals(n);
  std::vector<double> fitness(n);
  auto evaluate_all = [&] {
    const auto workers = static_cast<std::size_t>(std::clamp(cfg.threads, 1, static_cast<int>(n)));
    auto work = [&](std::size_t w) {
      for (std::size_t i = w; i < n; i += workers) evals[i] = problem.evaluate(pop[i].x);
    };
    if (workers == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
      for (auto& th : pool) th.join();
    }
    for (std::size_t i = 0; i < n; ++i) fitness[i] = evals[i].fitness;
  };

  OptimizeResult best;
  best.fitness = std::numeric_limits<double>::infinity();
  std::vector<double> best_x;
  auto track = [&] {
    for (std::size_t i = 0; i < n; ++i)
      if (fitness[i] < best.fitness) {
        best.fitness = fitness[i];
        best.schedule = evals[i].schedule;
        best.cost = evals[i].cost;
        best.report = evals[i].report;
        best_x = pop[i].x;
      }
    best.best_history.push_back(best.fitness);
  };

  evaluate_all();
  track();
  for (int it = 0; it < cfg.iterations; ++it) {
    const auto k = step_coefficients(cfg.dragonfly, it, cfg.iterations, rng);
    std::size_t worst = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (fitness[i] > fitness[worst]) worst = i;
    const auto enemy = pop[worst].x;
    pop = dragonfly_step(pop, fitness, space, k, rng, &best_x, &enemy);
    evaluate_all();
    track();
  }
  best.report = evaluate_constraints(best.schedule, sc, net, cfg.evaluation);
  return best;
}

}  // namespace hmg
