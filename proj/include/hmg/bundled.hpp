#pragma once

// Bundled test system: the Baran-Wu 33-bus radial feeder extended into an
// islanded hybrid microgrid, the 24-hour operating scenario, and the
// reference day-ahead dispatch used as the attack baseline.

#include <array>
#include <vector>

#include "hmg/attack.hpp"
#include "hmg/grid_model.hpp"
#include "hmg/scheduler.hpp"

namespace hmg::bundled {

inline constexpr double kBaseKva = 1000.0;
inline constexpr double kBaseKvAc = 12.66;
inline constexpr int kDcBus = 34;

struct BaranWuBranch {
  int from, to;
  double r_ohm, x_ohm;
  double p_kw, q_kvar;  // load at the receiving bus
};

// Baran & Wu (1989) 33-bus distribution test feeder.
inline constexpr std::array<BaranWuBranch, 32> kBaranWu33 = {{
    {1, 2, 0.0922, 0.0470, 100, 60},   {2, 3, 0.4930, 0.2511, 90, 40},    {3, 4, 0.3660, 0.1864, 120, 80},
    {4, 5, 0.3811, 0.1941, 60, 30},    {5, 6, 0.8190, 0.7070, 60, 20},    {6, 7, 0.1872, 0.6188, 200, 100},
    {7, 8, 0.7114, 0.2351, 200, 100},  {8, 9, 1.0300, 0.7400, 60, 20},    {9, 10, 1.0440, 0.7400, 60, 20},
    {10, 11, 0.1966, 0.0650, 45, 30},  {11, 12, 0.3744, 0.1238, 60, 35},  {12, 13, 1.4680, 1.1550, 60, 35},
    {13, 14, 0.5416, 0.7129, 120, 80}, {14, 15, 0.5910, 0.5260, 60, 10},  {15, 16, 0.7463, 0.5450, 60, 20},
    {16, 17, 1.2890, 1.7210, 60, 20},  {17, 18, 0.7320, 0.5740, 90, 40},  {2, 19, 0.1640, 0.1565, 90, 40},
    {19, 20, 1.5042, 1.3554, 90, 40},  {20, 21, 0.4095, 0.4784, 90, 40},  {21, 22, 0.7089, 0.9373, 90, 40},
    {3, 23, 0.4512, 0.3083, 90, 50},   {23, 24, 0.8980, 0.7091, 420, 200}, {24, 25, 0.8960, 0.7011, 420, 200},
    {6, 26, 0.2030, 0.1034, 60, 25},   {26, 27, 0.2842, 0.1447, 60, 25},  {27, 28, 1.0590, 0.9337, 60, 20},
    {28, 29, 0.8042, 0.7006, 120, 70}, {29, 30, 0.5075, 0.2585, 200, 600}, {30, 31, 0.9744, 0.9630, 150, 70},
    {31, 32, 0.3105, 0.3619, 210, 100}, {32, 33, 0.3410, 0.5302, 60, 40},
}};

/// Uniform feeder rating; the source dataset carries no thermal limits.
inline constexpr double kLineCapacityKw = 4000.0;

inline std::vector<Bus> ieee33_buses(bool with_dc = true) {
  std::vector<Bus> buses;
  buses.push_back({1, Subgrid::kAc, 0.9, 1.1, 0.0, 0.0});
  for (const auto& br : kBaranWu33) buses.push_back({br.to, Subgrid::kAc, 0.9, 1.1, br.p_kw, br.q_kvar});
  if (with_dc) buses.push_back({kDcBus, Subgrid::kDc, 0.95, 1.05, 270.0, 0.0});
  return buses;
}

inline std::vector<Line> ieee33_lines() {
  const double z_base = kBaseKvAc * kBaseKvAc * 1000.0 / kBaseKva;  // ohm
  std::vector<Line> lines;
  for (const auto& br : kBaranWu33)
    lines.push_back({br.from, br.to, br.r_ohm / z_base, br.x_ohm / z_base, kLineCapacityKw});
  return lines;
}

/// DG fleet. Renewable capacities are the Table-II/Table-III ratios; the
/// dispatchable limits are the largest outputs seen in the reference
/// dispatch, and the ramp rates sum to 505 kW/h.
inline std::vector<DGUnit> hmg_units() {
  using K = UnitKind;
  // id, name, bus, kind, dispatchable, p_min, p_max, cost, S_on, S_off, UR, DR, capacity
  return {
      {1, "PV1", kDcBus, K::kPV, false, 0, 250, 0, 0, 0, 0, 0, 250},
      {2, "WT1", kDcBus, K::kWT, false, 0, 200, 0, 0, 0, 0, 0, 200},
      {3, "FC", kDcBus, K::kFC, true, 0, 700, 0.30, 15, 5, 110, 110, 700},
      {4, "MT1", kDcBus, K::kMT, true, 0, 300, 0.46, 10, 5, 60, 60, 300},
      {5, "MT2", 30, K::kMT, true, 0, 1300, 0.52, 10, 5, 195, 195, 1300},
      {6, "MT3", 24, K::kMT, true, 0, 1100, 0.42, 10, 5, 140, 140, 1100},
      {7, "WT2", 14, K::kWT, false, 0, 550, 0, 0, 0, 0, 0, 550},
      {8, "WT3", 21, K::kWT, false, 0, 450, 0, 0, 0, 0, 0, 450},
      {9, "PV2", 32, K::kPV, false, 0, 400, 0, 0, 0, 0, 0, 400},
  };
}

inline Converter hmg_converter() { return {-1000.0, 1000.0, 18, kDcBus}; }

/// The islanded hybrid microgrid on the 33-bus feeder.
inline Network ieee33_hmg() {
  return Network("ieee33-hmg", ieee33_buses(), ieee33_lines(), hmg_units(), hmg_converter(), 1, kBaseKva);
}

/// Plain 33-bus feeder (no DGs, no dc side) for power-flow benchmarking.
inline Network ieee33_feeder() {
  auto buses = ieee33_buses(false);
  buses.push_back({kDcBus, Subgrid::kDc, 0.95, 1.05, 0.0, 0.0});
  return Network("ieee33", std::move(buses), ieee33_lines(), {}, hmg_converter(), 1, kBaseKva);
}

struct ScenarioRow {
  int hour;
  double ac_load_factor, dc_load_kw, wt, pv;
};

inline constexpr std::array<ScenarioRow, 24> kDailyProfile = {{
    {1, 0.6, 156, 0.119, 0},        {2, 0.65, 150, 0.119, 0},       {3, 0.59, 150, 0.089, 0},
    {4, 0.62, 153, 0.15, 0},        {5, 0.7, 168, 0.204, 0},        {6, 0.698, 174, 0.18, 0},
    {7, 0.71, 210, 0.24, 0.109},    {8, 0.79, 225, 0.26, 0.25},     {9, 0.86, 228, 0.26, 0.34},
    {10, 0.9, 240, 0.3, 0.39},      {11, 0.98, 234, 0.29, 0.468},   {12, 1.0, 222, 0.31, 0.47},
    {13, 0.99, 216, 0.29, 0.461},   {14, 1.0, 216, 0.27, 0.5},      {15, 0.97, 228, 0.285, 0.47},
    {16, 0.958, 240, 0.298, 0.35},  {17, 0.935, 255, 0.33, 0.26},   {18, 0.86, 264, 0.35, 0.19},
    {19, 0.88, 270, 0.4, 0.04},     {20, 0.91, 261, 0.45, 0},       {21, 0.927, 234, 0.42, 0},
    {22, 0.887, 213, 0.39, 0},      {23, 0.78, 195, 0.36, 0},       {24, 0.7, 168, 0.22, 0},
}};

inline Scenario daily_scenario(double reserve_fraction = 0.05, double ens_penalty = 4.0) {
  std::vector<double> f, dc, wt, pv;
  for (const auto& r : kDailyProfile) {
    f.push_back(r.ac_load_factor);
    dc.push_back(r.dc_load_kw);
    wt.push_back(r.wt);
    pv.push_back(r.pv);
  }
  return Scenario(f, dc, wt, pv, reserve_fraction, ens_penalty);
}

/// Reference optimal dispatch (kW) of the dispatchable units FC, MT1, MT2,
/// MT3 and the converter, hour 1..24.
struct ReferenceDispatchRow {
  double fc, mt1, mt2, mt3, conv;
};

inline constexpr std::array<ReferenceDispatchRow, 24> kReferenceDispatch = {{
    {438.6, 133.2, 564.1, 1098.3, -439.58}, {545.3, 191.6, 650.1, 1037, -610.7},
    {482.5, 251, 552.4, 947.85, -601.31},   {440.1, 214.7, 585.8, 1031, -531.8},
    {549.9, 274.5, 604.7, 1100, -697.17},   {572.2, 294.9, 591.5, 1100, -729.11},
    {469.8, 242, 678.4, 1100, -577.06},     {579.4, 298.5, 743.8, 1084.7, -767.39},
    {635.8, 299.8, 928.8, 1066, -844.57},   {590.9, 240, 1113, 1068.6, -748.43},
    {681.2, 211.7, 1298, 1100, -833.94},    {700, 235.4, 1300, 1100, -892.88},
    {684, 236, 1300, 1100, -877.23},        {669.1, 295, 1300, 1100, -927.15},
    {675.3, 295.1, 1300, 992.28, -916.92},  {606.1, 282.8, 1300, 1084.2, -796},
    {604.7, 223.4, 1300, 1080.7, -704.11},  {576.7, 189.1, 1153, 1021.8, -619.35},
    {685.2, 182.5, 1300, 899.47, -687.71},  {629.5, 237.9, 1300, 967.5, -696.49},
    {584.1, 220.7, 1300, 1100, -654.81},    {559.5, 161.9, 1274, 1068.7, -586.42},
    {451.2, 101.9, 1089, 1021.7, -430.13},  {341.6, 43.09, 1020, 1093.9, -260.72},
}};

/// The reference dispatch as a schedule over `net`'s dispatchable units,
/// all committed.
inline Schedule reference_schedule(const Network& net) {
  auto s = Schedule::zeros(net, kReferenceDispatch.size());
  if (s.unit_ids != std::vector<int>{3, 4, 5, 6})
    throw ValidationError("reference schedule: network does not carry the bundled FC, MT1, MT2, MT3 units");
  for (std::size_t t = 0; t < kReferenceDispatch.size(); ++t) {
    const auto& r = kReferenceDispatch[t];
    s.p_g[t] = {r.fc, r.mt1, r.mt2, r.mt3};
    s.u[t] = {1, 1, 1, 1};
    s.p_conv[t] = r.conv;
  }
  return s;
}

/// Meter buses targeted in the reference false-data attack (2100 kW peak).
inline const std::vector<int>& attack_targets() {
  static const std::vector<int> t{7, 8, 20, 21, 24, 25, 29, 30, 31, 32};
  return t;
}

/// rho = 0.7 under-reporting on the target meters for one hour from hour 12.
inline attack::AttackSpec reference_attack() { return {attack_targets(), 12, 1, 0.7, attack::Direction::kReduce}; }

/// Hourly meter readings 08:00-13:00 replayed through the detector: what
/// reached the control centre against the expected (forecast) value, kW.
struct DetectionPair {
  int hour;
  double measured_kw, forecast_kw;
};

inline constexpr std::array<DetectionPair, 6> kDetectionFixture = {{
    {8, 66364, 66364}, {9, 66454, 66454}, {10, 64382, 64382},
    {11, 63589, 63589}, {12, 72641, 64724}, {13, 74133, 63692},
}};

}  // namespace hmg::bundled
