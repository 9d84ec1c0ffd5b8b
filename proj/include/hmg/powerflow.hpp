#pragma once

// Radial ac power flow by backward/forward sweep, the nodal injection
// residual used to verify a solution, and the feeder/voltage limit checks.

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hmg/grid_model.hpp"

namespace hmg {

/// The network is not a radial tree rooted at the slack bus.
class StructureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Net injection at a bus: generation minus load.
struct Injection {
  double p_kw = 0.0;
  double q_kvar = 0.0;
};

struct PowerFlowOptions {
  double tolerance = 1e-8;  // pu voltage change between sweeps
  int max_iterations = 100;
};

struct PowerFlowResult {
  std::vector<double> v_mag;      // pu, per bus position (dc buses left at 1.0)
  std::vector<double> v_ang;      // rad
  std::vector<double> line_flow;  // kW at the sending end, positive from_bus -> to_bus
  std::vector<double> line_flow_q;
  std::vector<Injection> injections;  // as solved, per bus position
  double total_loss = 0.0;    // kW
  double total_loss_q = 0.0;  // kvar
  double slack_p = 0.0;       // kW supplied at the slack bus
  double slack_q = 0.0;       // kvar
  double tolerance = 0.0;
  bool converged = false;
  int iterations = 0;

  double max_voltage_deviation(const Network& net) const {
    double d = 0.0;
    for (std::size_t b = 0; b < v_mag.size(); ++b)
      if (net.buses()[b].subgrid == Subgrid::kAc) d = std::max(d, std::abs(v_mag[b] - 1.0));
    return d;
  }
};

namespace detail {

/// Lines oriented parent -> child in breadth-first order from the slack.
struct RadialOrder {
  std::vector<std::size_t> line;   // line index in BFS order
  std::vector<std::size_t> parent; // parent bus position for each entry
  std::vector<std::size_t> child;  // child bus position for each entry
};

inline RadialOrder radial_order(const Network& net) {
  if (!net.is_radial()) throw StructureError("network '" + net.name() + "' is not radial");
  const auto n = net.buses().size();
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t l = 0; l < net.lines().size(); ++l) {
    adj[net.bus_index(net.lines()[l].from_bus)].push_back(l);
    adj[net.bus_index(net.lines()[l].to_bus)].push_back(l);
  }
  RadialOrder order;
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> queue{net.bus_index(net.slack_bus())};
  seen[queue[0]] = true;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const auto b = queue[head];
    for (auto l : adj[b]) {
      const auto& line = net.lines()[l];
      const auto other = net.bus_index(line.from_bus) == b ? net.bus_index(line.to_bus) : net.bus_index(line.from_bus);
      if (seen[other]) continue;
      seen[other] = true;
      order.line.push_back(l);
      order.parent.push_back(b);
      order.child.push_back(other);
      queue.push_back(other);
    }
  }
  return order;
}

}  // namespace detail

/// Solves the ac sub-grid with the slack bus held at 1.0 pu. Loads are
/// constant power. Non-convergence is reported in the result, never thrown.
inline PowerFlowResult solve_radial(const Network& net, std::span<const Injection> injections,
                                    const PowerFlowOptions& opts = {}) {
  using cd = std::complex<double>;
  const auto n = net.buses().size();
  if (injections.size() != n) throw ContractViolation("solve_radial: one injection per bus required");
  for (const auto& inj : injections)
    if (!std::isfinite(inj.p_kw) || !std::isfinite(inj.q_kvar))
      throw ContractViolation("solve_radial: non-finite injection");
  const auto order = detail::radial_order(net);
  const auto slack = net.bus_index(net.slack_bus());
  const double base = net.base_kva();

  std::vector<cd> load(n);  // consumed power, pu
  for (std::size_t b = 0; b < n; ++b) load[b] = cd(-injections[b].p_kw, -injections[b].q_kvar) / base;
  std::vector<cd> z(order.line.size());
  for (std::size_t k = 0; k < z.size(); ++k) {
    const auto& l = net.lines()[order.line[k]];
    z[k] = cd(l.resistance, l.reactance);
  }

  PowerFlowResult res;
  res.tolerance = opts.tolerance;
  res.injections.assign(injections.begin(), injections.end());
  std::vector<cd> v(n, cd(1.0, 0.0));
  std::vector<cd> branch(order.line.size());
  std::vector<cd> node_current(n);
  std::vector<std::size_t> entry_of_child(n, static_cast<std::size_t>(-1));
  for (std::size_t k = 0; k < order.child.size(); ++k) entry_of_child[order.child[k]] = k;

  bool diverged = false;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    for (std::size_t b = 0; b < n; ++b) node_current[b] = std::conj(load[b] / v[b]);
    // Backward sweep: accumulate branch currents from the leaves.
    std::vector<cd> acc = node_current;
    for (std::size_t k = order.line.size(); k-- > 0;) {
      branch[k] = acc[order.child[k]];
      acc[order.parent[k]] += branch[k];
    }
    // Forward sweep: voltage drops from the slack outwards.
    double dv = 0.0;
    std::vector<cd> v_new = v;
    v_new[slack] = cd(1.0, 0.0);
    for (std::size_t k = 0; k < order.line.size(); ++k) {
      v_new[order.child[k]] = v_new[order.parent[k]] - z[k] * branch[k];
      dv = std::max(dv, std::abs(v_new[order.child[k]] - v[order.child[k]]));
    }
    v = std::move(v_new);
    res.iterations = it;
    bool sane = std::isfinite(dv);
    for (std::size_t k = 0; sane && k < order.child.size(); ++k) sane = std::abs(v[order.child[k]]) > 0.05;
    if (!sane) {
      diverged = true;
      break;
    }
    if (dv <= opts.tolerance) {
      res.converged = true;
      break;
    }
  }

  res.v_mag.assign(n, 1.0);
  res.v_ang.assign(n, 0.0);
  res.line_flow.assign(net.lines().size(), 0.0);
  res.line_flow_q.assign(net.lines().size(), 0.0);
  if (diverged) return res;

  for (std::size_t b = 0; b < n; ++b) {
    if (net.buses()[b].subgrid != Subgrid::kAc) continue;
    res.v_mag[b] = std::abs(v[b]);
    res.v_ang[b] = std::arg(v[b]);
  }
  cd loss(0.0, 0.0);
  cd slack_out(0.0, 0.0);
  for (std::size_t k = 0; k < order.line.size(); ++k) {
    const auto li = order.line[k];
    const cd s_send = v[order.parent[k]] * std::conj(branch[k]);
    const bool forward = net.bus_index(net.lines()[li].from_bus) == order.parent[k];
    const cd s_from = forward ? s_send : -(v[order.child[k]] * std::conj(branch[k]));
    res.line_flow[li] = s_from.real() * base;
    res.line_flow_q[li] = s_from.imag() * base;
    loss += z[k] * std::norm(branch[k]);
    if (order.parent[k] == slack) slack_out += s_send;
  }
  res.total_loss = loss.real() * base;
  res.total_loss_q = loss.imag() * base;
  const cd s_slack = (slack_out + load[slack]) * base;
  res.slack_p = s_slack.real();
  res.slack_q = s_slack.imag();
  return res;
}

/// Dense bus admittance matrix in polar form, indexed by bus position.
struct AdmittanceView {
  std::vector<std::vector<double>> y_mag;  // pu
  std::vector<std::vector<double>> y_ang;  // rad, arg(Y_jn)
};

inline AdmittanceView admittance(const Network& net) {
  using cd = std::complex<double>;
  const auto n = net.buses().size();
  std::vector<std::vector<cd>> y(n, std::vector<cd>(n));
  for (const auto& l : net.lines()) {
    const auto f = net.bus_index(l.from_bus);
    const auto t = net.bus_index(l.to_bus);
    const cd ys = 1.0 / cd(l.resistance, l.reactance);
    y[f][f] += ys;
    y[t][t] += ys;
    y[f][t] -= ys;
    y[t][f] -= ys;
  }
  AdmittanceView view;
  view.y_mag.assign(n, std::vector<double>(n, 0.0));
  view.y_ang.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < n; ++k) {
      view.y_mag[j][k] = std::abs(y[j][k]);
      view.y_ang[j][k] = std::arg(y[j][k]);
    }
  return view;
}

struct BusMismatch {
  double p = 0.0;  // pu
  double q = 0.0;  // pu
  double max() const { return std::max(std::abs(p), std::abs(q)); }
};

/// |scheduled - computed| nodal injections for every ac bus, computed with
/// the polar double sums P_j = sum_n V_j V_n Y_jn cos(d_j - d_n - th_jn) and
/// Q_j = sum_n V_j V_n Y_jn sin(d_j - d_n - th_jn). The slack bus is scheduled
/// at its solved output.
inline std::vector<BusMismatch> injection_residual(const Network& net, const PowerFlowResult& res) {
  const auto n = net.buses().size();
  if (res.v_mag.size() != n || res.v_ang.size() != n || res.injections.size() != n)
    throw ContractViolation("injection_residual: result does not match network");
  const auto y = admittance(net);
  const auto slack = net.bus_index(net.slack_bus());
  const double base = net.base_kva();
  std::vector<BusMismatch> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (net.buses()[j].subgrid != Subgrid::kAc) continue;
    double p = 0.0, q = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (y.y_mag[j][k] == 0.0) continue;
      const double a = res.v_ang[j] - res.v_ang[k] - y.y_ang[j][k];
      const double m = res.v_mag[j] * res.v_mag[k] * y.y_mag[j][k];
      p += m * std::cos(a);
      q += m * std::sin(a);
    }
    double ps = res.injections[j].p_kw / base;
    double qs = res.injections[j].q_kvar / base;
    if (j == slack) {
      ps = res.slack_p / base;
      qs = res.slack_q / base;
    }
    out[j] = {std::abs(ps - p), std::abs(qs - q)};
  }
  return out;
}

enum class LimitKind { kUnderVoltage, kOverVoltage, kFeeder };

struct LimitViolation {
  LimitKind kind;
  int element;       // bus id for voltage, line index for feeder
  double magnitude;  // pu for voltage, kW for feeder
};

inline std::vector<LimitViolation> check_limits(const Network& net, const PowerFlowResult& res) {
  std::vector<LimitViolation> out;
  for (std::size_t b = 0; b < net.buses().size() && b < res.v_mag.size(); ++b) {
    const auto& bus = net.buses()[b];
    if (bus.subgrid != Subgrid::kAc) continue;
    if (res.v_mag[b] < bus.v_min) out.push_back({LimitKind::kUnderVoltage, bus.id, bus.v_min - res.v_mag[b]});
    if (res.v_mag[b] > bus.v_max) out.push_back({LimitKind::kOverVoltage, bus.id, res.v_mag[b] - bus.v_max});
  }
  for (std::size_t l = 0; l < net.lines().size() && l < res.line_flow.size(); ++l) {
    const double excess = std::abs(res.line_flow[l]) - net.lines()[l].capacity;
    if (excess > 0.0) out.push_back({LimitKind::kFeeder, static_cast<int>(l), excess});
  }
  return out;
}

}  // namespace hmg
