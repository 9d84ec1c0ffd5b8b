#include <cmath>
#include <complex>
#include <random>

#include <gtest/gtest.h>

#include "hmg/bundled.hpp"
#include "hmg/powerflow.hpp"
#include "newton_oracle.hpp"

namespace hmg {
namespace {

std::vector<Injection> peak_load_injections(const Network& net) {
  std::vector<Injection> inj(net.buses().size());
  for (std::size_t b = 0; b < inj.size(); ++b)
    if (net.buses()[b].subgrid == Subgrid::kAc)
      inj[b] = {-net.buses()[b].peak_active_load, -net.buses()[b].peak_reactive_load};
  return inj;
}

std::vector<std::complex<double>> as_complex(const std::vector<Injection>& inj) {
  std::vector<std::complex<double>> s;
  for (const auto& i : inj) s.emplace_back(i.p_kw, i.q_kvar);
  return s;
}

Network two_bus(double r, double x) {
  std::vector<Bus> buses{{1, Subgrid::kAc, 0.9, 1.1, 0, 0}, {2, Subgrid::kAc, 0.9, 1.1, 0, 0},
                         {3, Subgrid::kDc, 0.95, 1.05, 0, 0}};
  std::vector<Line> lines{{1, 2, r, x, 5000}};
  return Network("two-bus", buses, lines, {}, Converter{-1, 1, 1, 3}, 1, 1000.0);
}

// Exact receiving-end voltage of a single line feeding a constant-power load:
// |V2|^4 + (2(PR+QX) - V1^2)|V2|^2 + |Z|^2|S|^2 = 0.
double two_bus_v2(double r, double x, double p, double q) {
  const double a = 1.0 - 2.0 * (p * r + q * x);
  const double c = (r * r + x * x) * (p * p + q * q);
  return std::sqrt((a + std::sqrt(a * a - 4.0 * c)) / 2.0);
}

Network random_radial(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> imp(0.001, 0.02), ld(0.0, 150.0);
  std::vector<Bus> buses{{1, Subgrid::kAc, 0.8, 1.2, 0, 0}};
  std::vector<Line> lines;
  for (int b = 2; b <= n; ++b) {
    buses.push_back({b, Subgrid::kAc, 0.8, 1.2, ld(rng), ld(rng) * 0.5});
    std::uniform_int_distribution<int> parent(1, b - 1);
    lines.push_back({parent(rng), b, imp(rng), imp(rng), 5000});
  }
  buses.push_back({n + 1, Subgrid::kDc, 0.9, 1.1, 0, 0});
  return Network("random", buses, lines, {}, Converter{-1, 1, 1, n + 1}, 1, 1000.0);
}

TEST(RadialPowerFlow, FlatProfileWithoutLoad) {
  const auto net = bundled::ieee33_feeder();
  std::vector<Injection> inj(net.buses().size());
  const auto res = solve_radial(net, inj);
  ASSERT_TRUE(res.converged);
  EXPECT_EQ(res.iterations, 1);
  EXPECT_DOUBLE_EQ(res.total_loss, 0.0);
  for (std::size_t b = 0; b < net.buses().size(); ++b) EXPECT_DOUBLE_EQ(res.v_mag[b], 1.0);
  for (const auto& m : injection_residual(net, res)) EXPECT_LE(m.max(), 1e-12);
}

TEST(RadialPowerFlow, TwoBusMatchesClosedForm) {
  const auto net = two_bus(0.05, 0.05);
  std::vector<Injection> inj(3);
  inj[1] = {-500.0, 0.0};
  const auto res = solve_radial(net, inj);
  ASSERT_TRUE(res.converged);
  const double v2 = two_bus_v2(0.05, 0.05, 0.5, 0.0);
  EXPECT_NEAR(res.v_mag[1], v2, 1e-8);
  const double loss_kw = 0.5 * 0.5 / (v2 * v2) * 0.05 * 1000.0;
  EXPECT_NEAR(res.total_loss, loss_kw, 1e-5);
  const auto r = injection_residual(net, res);
  EXPECT_LE(r[1].max(), res.tolerance);
}

TEST(RadialPowerFlow, PerturbedVoltageBreaksBalance) {
  const auto net = two_bus(0.05, 0.05);
  std::vector<Injection> inj(3);
  inj[1] = {-500.0, 0.0};
  auto res = solve_radial(net, inj);
  res.v_mag[1] += 0.01;
  EXPECT_GT(injection_residual(net, res)[1].max(), res.tolerance);
}

TEST(RadialPowerFlow, BaseCaseMatchesNewtonOracle) {
  const auto net = bundled::ieee33_feeder();
  const auto inj = peak_load_injections(net);
  const auto res = solve_radial(net, inj);
  ASSERT_TRUE(res.converged);
  const auto oracle = oracle::newton_power_flow(net, as_complex(inj));
  ASSERT_TRUE(oracle.converged);
  for (std::size_t b = 0; b < net.buses().size(); ++b) {
    if (net.buses()[b].subgrid != Subgrid::kAc) continue;
    EXPECT_NEAR(res.v_mag[b], std::abs(oracle.v[b]), 1e-6) << "bus " << net.buses()[b].id;
    EXPECT_NEAR(res.v_ang[b], std::arg(oracle.v[b]), 1e-6) << "bus " << net.buses()[b].id;
  }
  EXPECT_NEAR(res.total_loss, oracle.loss_kw, 1e-3 * oracle.loss_kw);
  // Published figures for the Baran-Wu feeder: ~202.7 kW loss, Vmin ~0.913 pu at bus 18.
  EXPECT_NEAR(res.total_loss, 202.7, 0.5);
  EXPECT_NEAR(res.v_mag[net.bus_index(18)], 0.9131, 5e-4);
  double worst = 0.0;
  for (const auto& m : injection_residual(net, res)) worst = std::max(worst, m.max());
  EXPECT_LE(worst, res.tolerance);
}

TEST(RadialPowerFlow, ConservationHolds) {
  const auto net = bundled::ieee33_feeder();
  const auto inj = peak_load_injections(net);
  const auto res = solve_radial(net, inj);
  double net_inj = 0.0;
  for (const auto& i : inj) net_inj += i.p_kw;
  EXPECT_NEAR(res.slack_p + net_inj, res.total_loss, 1e-5);
}

TEST(RadialPowerFlow, RejectsMeshedNetwork) {
  std::vector<Bus> buses{{1, Subgrid::kAc, 0.9, 1.1, 0, 0}, {2, Subgrid::kAc, 0.9, 1.1, 0, 0},
                         {3, Subgrid::kAc, 0.9, 1.1, 0, 0}, {4, Subgrid::kDc, 0.9, 1.1, 0, 0}};
  std::vector<Line> lines{{1, 2, 0.01, 0.01, 100}, {2, 3, 0.01, 0.01, 100}, {3, 1, 0.01, 0.01, 100}};
  const Network net("mesh", buses, lines, {}, Converter{-1, 1, 1, 4}, 1);
  std::vector<Injection> inj(4);
  EXPECT_THROW(solve_radial(net, inj), StructureError);
}

TEST(RadialPowerFlow, CollapseIsReportedNotThrown) {
  const auto net = two_bus(0.05, 0.05);
  std::vector<Injection> inj(3);
  inj[1] = {-20000.0, -5000.0};  // far beyond the nose of the PV curve
  const auto res = solve_radial(net, inj);
  EXPECT_FALSE(res.converged);
}

TEST(RadialPowerFlow, LimitChecks) {
  const auto net = two_bus(0.05, 0.05);
  std::vector<Injection> inj(3);
  auto res = solve_radial(net, inj);
  EXPECT_TRUE(check_limits(net, res).empty());
  res.v_mag[1] = 0.88;
  auto v = check_limits(net, res);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].kind, LimitKind::kUnderVoltage);
  EXPECT_NEAR(v[0].magnitude, 0.02, 1e-12);

  std::vector<Line> lines{{1, 2, 0.05, 0.05, 100}};
  const Network small("feeder", net.buses(), lines, {}, net.converter(), 1);
  auto r2 = solve_radial(small, inj);
  r2.line_flow[0] = 120.0;
  v = check_limits(small, r2);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].kind, LimitKind::kFeeder);
  EXPECT_NEAR(v[0].magnitude, 20.0, 1e-12);
}

TEST(RadialPowerFlowProperty, HalvingLoadsNeverIncreasesLoss) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto net = random_radial(rng, 12);
    auto inj = peak_load_injections(net);
    const auto full = solve_radial(net, inj);
    for (auto& i : inj) {
      i.p_kw *= 0.5;
      i.q_kvar *= 0.5;
    }
    const auto half = solve_radial(net, inj);
    ASSERT_TRUE(full.converged && half.converged);
    EXPECT_LE(half.total_loss, full.total_loss + 1e-9);
    double worst = 0.0;
    for (const auto& m : injection_residual(net, half)) worst = std::max(worst, m.max());
    EXPECT_LE(worst, half.tolerance);
  }
}

TEST(RadialPowerFlowProperty, LossZeroIffNoCurrent) {
  const auto net = two_bus(0.05, 0.05);
  std::vector<Injection> inj(3);
  EXPECT_EQ(solve_radial(net, inj).total_loss, 0.0);
  inj[1] = {-1.0, 0.0};
  EXPECT_GT(solve_radial(net, inj).total_loss, 0.0);
}

TEST(GridModel, BundledFeederIsRadial) {
  const auto net = bundled::ieee33_hmg();
  EXPECT_EQ(net.lines().size(), net.ac_bus_count() - 1);
  EXPECT_TRUE(net.is_radial());
}

}  // namespace
}  // namespace hmg
