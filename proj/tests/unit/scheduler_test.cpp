#include <gtest/gtest.h>

#include <random>

#include "hmg/bundled.hpp"
#include "hmg/scheduler.hpp"
#include "toy_grid.hpp"
#include "uc_oracle.hpp"

using namespace hmg;
using hmg::oracle::ToyUnit;

namespace {

DGUnit plain_unit(int id, double p_max, double cost, double s_on, double s_off) {
  return {id, "G" + std::to_string(id), 1, UnitKind::kMT, true, 0.0, p_max, cost, s_on, s_off, 1e4, 1e4, p_max};
}

Schedule single(int id, std::vector<int> u, std::vector<double> p) {
  Schedule s;
  s.unit_ids = {id};
  for (std::size_t t = 0; t < u.size(); ++t) {
    s.u.push_back({u[t]});
    s.p_g.push_back({p[t]});
  }
  s.p_conv.assign(u.size(), 0.0);
  return s;
}

Schedule reference_dispatch(const Network& net) { return bundled::reference_schedule(net); }

std::vector<double> scaled(const std::vector<double>& f, double peak) {
  std::vector<double> out;
  for (double x : f) out.push_back(peak * x);
  return out;
}

}  // namespace

TEST(OperatingCost, AllOffFromAllOffIsFree) {
  const std::vector<DGUnit> units{plain_unit(1, 100, 0.5, 10, 5)};
  const std::vector<int> u0{0};
  EXPECT_EQ(operating_cost(single(1, {0, 0, 0}, {0, 0, 0}), units, u0), 0.0);
}

TEST(OperatingCost, StartupPlusEnergy) {
  const std::vector<DGUnit> units{plain_unit(1, 200, 0.5, 10, 5)};
  const std::vector<int> u0{0};
  EXPECT_DOUBLE_EQ(operating_cost(single(1, {1}, {100}), units, u0), 60.0);
}

TEST(OperatingCost, ShutdownChargedOnce) {
  const std::vector<DGUnit> units{plain_unit(1, 200, 0.5, 10, 7)};
  EXPECT_DOUBLE_EQ(operating_cost(single(1, {1, 0, 0}, {40, 0, 0}), units), 20.0 + 7.0);
}

TEST(OperatingCost, DefaultInitialStateIsAllOn) {
  const std::vector<DGUnit> units{plain_unit(1, 200, 1.0, 10, 7)};
  EXPECT_DOUBLE_EQ(operating_cost(single(1, {1}, {50}), units), 50.0);
}

TEST(OperatingCost, NegativeCommittedOutputRejected) {
  const std::vector<DGUnit> units{plain_unit(1, 200, 1.0, 0, 0)};
  EXPECT_THROW(operating_cost(single(1, {1}, {-1}), units), ContractViolation);
}

TEST(OperatingCost, PermutationInvariant) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t nu = 4, h = 6;
    std::vector<DGUnit> units;
    for (std::size_t k = 0; k < nu; ++k)
      units.push_back(plain_unit(static_cast<int>(k + 1), 100, u(rng), 20 * u(rng), 10 * u(rng)));
    Schedule s;
    for (std::size_t k = 0; k < nu; ++k) s.unit_ids.push_back(static_cast<int>(k + 1));
    for (std::size_t t = 0; t < h; ++t) {
      std::vector<int> ut;
      std::vector<double> pt;
      for (std::size_t k = 0; k < nu; ++k) {
        ut.push_back(u(rng) < 0.6);
        pt.push_back(ut.back() ? 100 * u(rng) : 0.0);
      }
      s.u.push_back(ut);
      s.p_g.push_back(pt);
    }
    s.p_conv.assign(h, 0.0);
    std::vector<int> u0{1, 0, 1, 0};
    std::vector<std::size_t> perm{2, 0, 3, 1};
    Schedule ps = s;
    std::vector<DGUnit> pu;
    std::vector<int> pu0;
    for (std::size_t k = 0; k < nu; ++k) {
      ps.unit_ids[k] = s.unit_ids[perm[k]];
      pu.push_back(units[perm[k]]);
      pu0.push_back(u0[perm[k]]);
      for (std::size_t t = 0; t < h; ++t) {
        ps.u[t][k] = s.u[t][perm[k]];
        ps.p_g[t][k] = s.p_g[t][perm[k]];
      }
    }
    EXPECT_NEAR(operating_cost(s, units, u0), operating_cost(ps, pu, pu0), 1e-9);
  }
}

TEST(Schedule, DecommittedOutputIsAContractViolation) {
  EXPECT_THROW(single(1, {0}, {5}).validate(), ContractViolation);
  EXPECT_THROW(single(1, {2}, {5}).validate(), ContractViolation);
}

class ReferenceSchedule : public ::testing::Test {
 protected:
  Network net = bundled::ieee33_hmg();
  Scenario sc = bundled::daily_scenario();
  Schedule ref = reference_dispatch(net);
};

TEST_F(ReferenceSchedule, HourTwelveRespectsCapsAndRamps) {
  const auto rep = evaluate_constraints(ref, sc, net);
  for (const auto& v : rep.items) {
    if (v.hour != 11) continue;
    EXPECT_NE(v.constraint, ConstraintClass::kCapacity);
    EXPECT_NE(v.constraint, ConstraintClass::kRamp);
  }
}

TEST_F(ReferenceSchedule, WholeDayRespectsCapsRampsVoltage) {
  std::vector<PowerFlowResult> flows;
  const auto rep = evaluate_constraints(ref, sc, net, {}, &flows);
  EXPECT_EQ(rep.count(ConstraintClass::kCapacity), 0u);
  EXPECT_EQ(rep.count(ConstraintClass::kRamp), 0u);
  EXPECT_EQ(rep.count(ConstraintClass::kVoltage), 0u);
  EXPECT_EQ(rep.count(ConstraintClass::kFeeder), 0u);
  ASSERT_EQ(flows.size(), 24u);
  for (const auto& pf : flows) EXPECT_TRUE(pf.converged);
  // Rounded table entries leave only sub-0.1 kW residue on the dc side.
  for (const auto& v : rep.items)
    if (v.constraint == ConstraintClass::kDcBalance) EXPECT_LT(v.magnitude, 0.1);
}

TEST_F(ReferenceSchedule, OneKilowattOverCapacity) {
  auto s = ref;
  s.p_g[11][0] = 701.0;  // FC p_max 700
  const auto base = evaluate_constraints(ref, sc, net);
  const auto rep = evaluate_constraints(s, sc, net);
  ASSERT_EQ(rep.count(ConstraintClass::kCapacity), 1u);
  EXPECT_NEAR(rep.total(ConstraintClass::kCapacity), 1.0, 1e-9);
  EXPECT_EQ(base.count(ConstraintClass::kCapacity), 0u);
}

TEST_F(ReferenceSchedule, RampExcessMagnitude) {
  auto s = ref;
  // MT3 ramp limit is 140 kW/h; hours 11 and 12 both run at 1100.
  s.p_g[10][3] = 1100.0 - 190.0;
  s.p_g[9][3] = 1100.0 - 190.0;
  s.p_g[8][3] = 1100.0 - 190.0;
  const auto rep = evaluate_constraints(s, sc, net);
  std::vector<Violation> ramps;
  for (const auto& v : rep.items)
    if (v.constraint == ConstraintClass::kRamp && v.element == 6) ramps.push_back(v);
  ASSERT_FALSE(ramps.empty());
  bool found = false;
  for (const auto& v : ramps)
    if (v.hour == 11) {
      EXPECT_NEAR(v.magnitude, 50.0, 1e-9);
      found = true;
    }
  EXPECT_TRUE(found);
}

TEST_F(ReferenceSchedule, DecommittedUnitWithOutputIsRejected) {
  auto s = ref;
  s.u[5][1] = 0;
  EXPECT_THROW(evaluate_constraints(s, sc, net), ContractViolation);
}

TEST(Reserve, CommittedCapacityEqualToDemandIsFlagged) {
  // Committed capacity exactly equals demand, so any positive reserve fails.
  const std::vector<ToyUnit> units{{0.0, 100.0, 1.0, 0.0, 0.0}};
  const auto net = oracle::single_bus_network(100.0, units);
  const Scenario sc({1.0}, {0.0}, {0.0}, {0.0}, 0.05);
  const auto s = single(1, {1}, {100.0});
  const auto rep = evaluate_constraints(s, sc, net);
  ASSERT_EQ(rep.count(ConstraintClass::kReserve), 1u);
  EXPECT_NEAR(rep.total(ConstraintClass::kReserve), 5.0, 1e-9);
  EXPECT_EQ(rep.count(ConstraintClass::kAcBalance), 0u);

  const Scenario no_reserve({1.0}, {0.0}, {0.0}, {0.0}, 0.0);
  EXPECT_TRUE(evaluate_constraints(s, no_reserve, net).feasible());
}

TEST(Reserve, UsesCommittedNotDispatchedCapacity) {
  const std::vector<ToyUnit> units{{0.0, 60.0, 1.0, 0.0, 0.0}, {0.0, 60.0, 2.0, 0.0, 0.0}};
  const auto net = oracle::single_bus_network(100.0, units);
  const Scenario sc({0.5}, {0.0}, {0.0}, {0.0}, 0.1);
  Schedule s;
  s.unit_ids = {1, 2};
  s.u = {{1, 1}};
  s.p_g = {{50.0, 0.0}};
  s.p_conv = {0.0};
  EXPECT_TRUE(evaluate_constraints(s, sc, net).feasible());
}

TEST(Penalty, FeasibleFitnessEqualsCost) {
  const auto units = oracle::two_unit_fleet();
  const auto net = oracle::single_bus_network(100.0, units);
  const auto sc = oracle::factor_scenario(oracle::daily_factors());
  OptimizerConfig cfg;
  cfg.iterations = 20;
  const auto r = optimize(sc, net, cfg);
  ASSERT_TRUE(r.report.feasible());
  EXPECT_DOUBLE_EQ(r.fitness, r.cost);
  EXPECT_NEAR(r.cost, operating_cost(r.schedule, schedule_units(net, r.schedule)), 1e-6);
}

// Dragonfly step

namespace {

SearchSpace box(std::size_t d, std::size_t binaries = 0) {
  SearchSpace s;
  for (std::size_t j = 0; j < d; ++j) {
    const bool bin = j >= d - binaries;
    s.lb.push_back(0.0);
    s.ub.push_back(bin ? 1.0 : 10.0);
    s.binary.push_back(bin);
  }
  return s;
}

std::vector<Dragonfly> random_population(std::size_t n, const SearchSpace& space, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Dragonfly> pop(n);
  for (auto& ind : pop)
    for (std::size_t j = 0; j < space.dims(); ++j) {
      ind.x.push_back(space.binary[j] ? std::round(u(rng)) : 10.0 * u(rng));
      ind.dx.push_back(space.binary[j] ? 0.0 : u(rng) - 0.5);
    }
  return pop;
}

}  // namespace

TEST(DragonflyStep, ZeroStepsZeroInertiaIsAFixedPoint) {
  const auto space = box(5, 2);
  auto pop = random_population(6, space, 3);
  for (auto& ind : pop) std::fill(ind.dx.begin(), ind.dx.end(), 0.0);
  const std::vector<double> fit{3, 1, 4, 1, 5, 9};
  StepCoefficients k;  // all zero
  std::mt19937_64 rng(1);
  const auto next = dragonfly_step(pop, fit, space, k, rng);
  for (std::size_t i = 0; i < pop.size(); ++i) EXPECT_EQ(next[i].x, pop[i].x);
}

TEST(DragonflyStep, LoneIndividualFollowsFoodAndEnemyOnly) {
  const auto space = box(3);
  std::vector<Dragonfly> pop{{{2.0, 5.0, 8.0}, {0.0, 0.0, 0.0}}};
  const std::vector<double> fit{1.0};
  StepCoefficients k;
  k.s = k.a = k.c = 100.0;  // would dominate if any neighbour existed
  k.f = 0.2;
  k.e = 0.1;
  k.radius = 10.0;
  const std::vector<double> food{4.0, 5.0, 6.0}, enemy{0.0, 5.0, 10.0};
  std::mt19937_64 rng(1);
  const auto next = dragonfly_step(pop, fit, space, k, rng, &food, &enemy);
  const std::vector<double> expect{2.0 + 0.2 * 2.0 + 0.1 * 2.0, 5.0, 8.0 + 0.2 * -2.0 + 0.1 * -2.0};
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(next[0].x[j], expect[j], 1e-12);

  // Steps are capped at a tenth of the variable span.
  k.f = 5.0;
  const auto capped = dragonfly_step(pop, fit, space, k, rng, &food, &enemy);
  EXPECT_DOUBLE_EQ(capped[0].x[0], 3.0);
  EXPECT_DOUBLE_EQ(capped[0].x[2], 7.0);
}

TEST(DragonflyStep, DeterministicForSeed) {
  const auto space = box(8, 3);
  const auto pop = random_population(7, space, 9);
  const std::vector<double> fit{5, 4, 3, 2, 1, 0, -1};
  DragonflyWeights w;
  std::mt19937_64 r1(42), r2(42);
  const auto k1 = step_coefficients(w, 3, 10, r1);
  const auto k2 = step_coefficients(w, 3, 10, r2);
  const auto a = dragonfly_step(pop, fit, space, k1, r1);
  const auto b = dragonfly_step(pop, fit, space, k2, r2);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].x, b[i].x);
    EXPECT_EQ(a[i].dx, b[i].dx);
  }
}

TEST(DragonflyStep, StaysInBoundsAndBinary) {
  const auto space = box(10, 4);
  auto pop = random_population(12, space, 17);
  std::vector<double> fit(12);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DragonflyWeights w;
  for (int it = 0; it < 40; ++it) {
    for (auto& f : fit) f = u(rng);
    pop = dragonfly_step(pop, fit, space, step_coefficients(w, it, 40, rng), rng);
    for (const auto& ind : pop)
      for (std::size_t j = 0; j < space.dims(); ++j) {
        EXPECT_GE(ind.x[j], space.lb[j]);
        EXPECT_LE(ind.x[j], space.ub[j]);
        if (space.binary[j]) EXPECT_TRUE(ind.x[j] == 0.0 || ind.x[j] == 1.0);
      }
  }
}

TEST(DragonflyStep, EmptyPopulationRejected) {
  std::mt19937_64 rng(1);
  EXPECT_THROW(dragonfly_step({}, std::vector<double>{}, box(2), StepCoefficients{}, rng), ContractViolation);
}

// Exact oracles

TEST(UcOracle, DynamicProgramMatchesEnumeration) {
  const auto units = oracle::two_unit_fleet();
  const auto f = oracle::daily_factors();
  for (std::size_t start : {0u, 6u, 12u, 18u}) {
    std::vector<double> loads;
    for (std::size_t t = start; t < start + 6; ++t) loads.push_back(100.0 * f[t]);
    for (unsigned init = 0; init < 4; ++init)
      EXPECT_NEAR(oracle::dp_optimum(loads, units, init), oracle::enumerate_optimum(loads, units, init), 1e-9);
  }
}

TEST(Optimizer, SingleUnitConstantLoad) {
  const std::vector<ToyUnit> units{{0.0, 200.0, 1.0, 10.0, 5.0}};
  const auto net = oracle::single_bus_network(100.0, units);
  const auto sc = oracle::factor_scenario(std::vector<double>(24, 1.0));
  OptimizerConfig cfg;
  cfg.iterations = 30;
  const auto r = optimize(sc, net, cfg);
  ASSERT_TRUE(r.report.feasible());
  for (std::size_t t = 0; t < 24; ++t) {
    EXPECT_EQ(r.schedule.u[t][0], 1);
    EXPECT_NEAR(r.schedule.p_g[t][0], 100.0, 1e-6);
  }
  const std::vector<double> loads(24, 100.0);
  EXPECT_NEAR(r.cost, oracle::enumerate_optimum({100.0, 100.0, 100.0}, units, 1) * 8.0, 1e-6);
  EXPECT_NEAR(r.cost, oracle::dp_optimum(loads, units, 1), 1e-6);
}

TEST(Optimizer, TwoUnitToyWithinOnePercent) {
  const auto units = oracle::two_unit_fleet();
  const auto f = oracle::daily_factors();
  const double opt = oracle::dp_optimum(scaled(f, 100.0), units, 3);
  const auto net = oracle::single_bus_network(100.0, units);
  const auto sc = oracle::factor_scenario(f);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    OptimizerConfig cfg;
    cfg.seed = seed;
    const auto r = optimize(sc, net, cfg);
    EXPECT_TRUE(r.report.feasible()) << "seed " << seed;
    EXPECT_LE(r.cost, opt * 1.01) << "seed " << seed;
    EXPECT_GE(r.cost, opt - 1e-6) << "seed " << seed;
  }
}

TEST(Optimizer, BestFitnessNeverIncreases) {
  const auto units = oracle::two_unit_fleet();
  const auto net = oracle::single_bus_network(100.0, units);
  const auto sc = oracle::factor_scenario(oracle::daily_factors());
  OptimizerConfig cfg;
  cfg.iterations = 40;
  cfg.seed = 11;
  const auto r = optimize(sc, net, cfg);
  ASSERT_EQ(r.best_history.size(), 41u);
  for (std::size_t i = 1; i < r.best_history.size(); ++i) EXPECT_LE(r.best_history[i], r.best_history[i - 1]);
  EXPECT_DOUBLE_EQ(r.best_history.back(), r.fitness);
}

TEST(Optimizer, ThreadedMatchesSerial) {
  const auto net = bundled::ieee33_hmg();
  const auto sc = bundled::daily_scenario();
  OptimizerConfig cfg;
  cfg.iterations = 3;
  cfg.population_size = 8;
  const auto serial = optimize(sc, net, cfg);
  cfg.threads = 4;
  const auto threaded = optimize(sc, net, cfg);
  EXPECT_EQ(serial.best_history, threaded.best_history);
  EXPECT_EQ(serial.schedule.p_g, threaded.schedule.p_g);
  EXPECT_EQ(serial.schedule.u, threaded.schedule.u);
  EXPECT_EQ(serial.schedule.p_conv, threaded.schedule.p_conv);
}

TEST(Optimizer, SameSeedSameResult) {
  const auto units = oracle::two_unit_fleet();
  const auto net = oracle::single_bus_network(100.0, units);
  const auto sc = oracle::factor_scenario(oracle::daily_factors());
  OptimizerConfig cfg;
  cfg.iterations = 10;
  cfg.seed = 99;
  const auto a = optimize(sc, net, cfg);
  const auto b = optimize(sc, net, cfg);
  EXPECT_EQ(a.best_history, b.best_history);
  EXPECT_EQ(a.schedule.p_g, b.schedule.p_g);
}

TEST(Optimizer, FullNetworkFeasible) {
  const auto net = bundled::ieee33_hmg();
  const auto sc = bundled::daily_scenario();
  OptimizerConfig cfg;
  cfg.iterations = 30;
  const auto r = optimize(sc, net, cfg);
  EXPECT_TRUE(r.report.feasible());
  std::vector<PowerFlowResult> flows;
  evaluate_constraints(r.schedule, sc, net, {}, &flows);
  for (const auto& pf : flows) EXPECT_LE(pf.max_voltage_deviation(net), 0.1);
  for (std::size_t t = 0; t < 24; ++t)
    for (std::size_t k = 0; k < r.schedule.units(); ++k) {
      const auto& g = net.units()[net.unit_index(r.schedule.unit_ids[k])];
      if (r.schedule.u[t][k]) {
        EXPECT_GE(r.schedule.p_g[t][k], g.p_min);
        EXPECT_LE(r.schedule.p_g[t][k], g.p_max);
      }
    }
}

TEST(Optimizer, InvalidConfigRejected) {
  const auto net = bundled::ieee33_hmg();
  const auto sc = bundled::daily_scenario();
  OptimizerConfig cfg;
  cfg.population_size = 1;
  EXPECT_THROW(optimize(sc, net, cfg), ValidationError);
  cfg.population_size = 4;
  cfg.penalty_weights[2] = -1.0;
  EXPECT_THROW(optimize(sc, net, cfg), ValidationError);
}

TEST(Optimizer, OverloadReportsBestEffortViolations) {
  const std::vector<ToyUnit> units{{0.0, 50.0, 1.0, 0.0, 0.0}};
  const auto net = oracle::single_bus_network(100.0, units);
  const auto sc = oracle::factor_scenario(std::vector<double>(3, 1.0));
  OptimizerConfig cfg;
  cfg.iterations = 5;
  const auto r = optimize(sc, net, cfg);
  EXPECT_FALSE(r.report.feasible());
  EXPECT_GT(r.report.count(ConstraintClass::kAcBalance), 0u);
}
