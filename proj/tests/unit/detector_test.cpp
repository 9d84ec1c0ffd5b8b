#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "hmg/detector.hpp"

namespace hmg {
namespace {

DetectorParams reference_params() { return DetectorParams{0.08, 24.59, 0.0094, 0.99, 0.001, 0.002}; }

TEST(Thresholds, ReferenceValues) {
  const auto t = thresholds(0.001, 0.002);
  EXPECT_NEAR(t.ln_u, 6.9058, 1e-4);
  EXPECT_NEAR(t.ln_l, -6.2136, 1e-4);
  EXPECT_NEAR(t.ln_u, std::log(998.0), 1e-12);
}

TEST(Thresholds, SymmetricWhenAlphaEqualsBeta) {
  const auto t = thresholds(0.03, 0.03);
  EXPECT_NEAR(t.ln_u, -t.ln_l, 1e-12);
}

TEST(Thresholds, RejectsBadProbabilities) {
  EXPECT_THROW(thresholds(0.0, 0.1), ParameterError);
  EXPECT_THROW(thresholds(0.1, 1.0), ParameterError);
  DetectorParams p = reference_params();
  p.alpha = p.beta = 0.5;
  EXPECT_THROW(p.validate(), ParameterError);
}

TEST(Residual, Values) {
  EXPECT_EQ(residual(5.0, 5.0), 0.0);
  EXPECT_EQ(residual(72641, 64724), 7917.0);
  EXPECT_EQ(residual(10, 20), residual(20, 10));
  EXPECT_THROW(residual(1.0, 0.0), ParameterError);
}

TEST(Binarize, Bands) {
  const auto p = reference_params();
  EXPECT_EQ(binarize(5.0, 100.0, p), Sample::kZero);
  EXPECT_EQ(binarize(8.0, 100.0, p), Sample::kZero);
  EXPECT_EQ(binarize(50.0, 100.0, p), Sample::kOne);
  EXPECT_EQ(binarize(2459.0, 100.0, p), Sample::kOne);
  EXPECT_EQ(binarize(3000.0, 100.0, p), Sample::kDirectAttack);
}

TEST(Sprt, TwoZerosAcceptH0) {
  const auto p = reference_params();
  SprtState s{"m", 0, 0, 0};
  auto r = sprt_step(s, 0, p);
  EXPECT_EQ(r.decision, Decision::kContinue);
  EXPECT_NEAR(r.log_ratio, -4.5957, 1e-4);
  r = sprt_step(r.state, 0, p);
  EXPECT_EQ(r.decision, Decision::kNoAttack);
  EXPECT_NEAR(r.log_ratio, -9.19, 0.01);
  EXPECT_EQ(r.state.n, 0);
  EXPECT_EQ(r.state.m, 0);
  EXPECT_EQ(r.state.cumulative_log_ratio, 0.0);
}

TEST(Sprt, OnesAccumulatePositively) {
  const auto p = reference_params();
  auto r = sprt_step(SprtState{}, 1, p);
  EXPECT_EQ(r.decision, Decision::kContinue);
  EXPECT_NEAR(r.log_ratio, 4.6570, 1e-4);
  r = sprt_step(r.state, 1, p);
  EXPECT_EQ(r.decision, Decision::kAttack);
  EXPECT_NEAR(r.log_ratio, 9.314, 1e-3);
}

TEST(Sprt, RejectsNonBinary) { EXPECT_THROW(sprt_step(SprtState{}, 2, reference_params()), ContractViolation); }

TEST(SprtProperty, RatioDependsOnlyOnCounts) {
  DetectorParams p = reference_params();
  p.alpha = 1e-9;
  p.beta = 1e-9;  // wide thresholds so nothing terminates
  std::mt19937_64 rng(3);
  std::bernoulli_distribution coin(0.5);
  SprtState s;
  for (int i = 0; i < 6; ++i) {
    auto r = sprt_step(s, coin(rng) ? 1 : 0, p);
    if (is_terminal(r.decision)) {
      s = r.state;
      continue;
    }
    s = r.state;
    const double expect = s.m * std::log(p.p1 / p.p0) + (s.n - s.m) * std::log((1 - p.p1) / (1 - p.p0));
    EXPECT_EQ(s.cumulative_log_ratio, expect);
  }
}

TEST(ExpectedSamples, ReferenceValues) {
  const auto p = reference_params();
  EXPECT_NEAR(expected_samples(p, Hypothesis::kH0), 1.375, 0.01);
  EXPECT_NEAR(expected_samples(p, Hypothesis::kH1), 1.507, 0.01);
  EXPECT_EQ(std::ceil(expected_samples(p, Hypothesis::kH1)), 2.0);
}

TEST(ExpectedSamples, SymmetricParameters) {
  DetectorParams p{0.1, 1.0, 0.2, 0.8, 0.01, 0.01};
  EXPECT_NEAR(expected_samples(p, Hypothesis::kH0), expected_samples(p, Hypothesis::kH1), 1e-12);
}

TEST(ProcessMeasurement, TableSevenSequence) {
  const auto p = reference_params();
  const double actual[] = {66364, 66454, 64382, 63589, 64724, 63692};
  const double received[] = {66364, 66454, 64382, 63589, 72641, 74133};
  const Decision expect[] = {Decision::kContinue, Decision::kNoAttack, Decision::kContinue,
                             Decision::kNoAttack, Decision::kContinue, Decision::kAttack};
  DetectorRegistry reg;
  for (int i = 0; i < 6; ++i)
    EXPECT_EQ(process_measurement("meter", received[i], actual[i], reg, p).decision, expect[i]) << "row " << i;
}

TEST(ProcessMeasurement, CleanStreamAlternates) {
  const auto p = reference_params();
  DetectorRegistry reg;
  for (int i = 0; i < 10; ++i)
    EXPECT_EQ(process_measurement("a", 50, 50, reg, p).decision, i % 2 ? Decision::kNoAttack : Decision::kContinue);
}

TEST(ProcessMeasurement, DirectAttackResets) {
  const auto p = reference_params();
  DetectorRegistry reg;
  process_measurement("a", 60, 50, reg, p);
  EXPECT_EQ(reg.state("a").n, 1);
  EXPECT_EQ(process_measurement("a", 50 * 40, 50, reg, p).decision, Decision::kDirectAttack);
  EXPECT_EQ(reg.state("a").n, 0);
}

TEST(ProcessMeasurement, MetersAreIndependent) {
  const auto p = reference_params();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 0.3);
  std::vector<std::pair<std::string, double>> stream;
  for (int i = 0; i < 200; ++i) stream.emplace_back(i % 3 ? "x" : "y", 100 * (1 + u(rng)));
  DetectorRegistry joint, solo_x, solo_y;
  std::vector<Decision> jx, jy, sx, sy;
  for (const auto& [id, v] : stream) {
    (id == "x" ? jx : jy).push_back(process_measurement(id, v, 100, joint, p).decision);
    (id == "x" ? sx : sy).push_back(process_measurement(id, v, 100, id == "x" ? solo_x : solo_y, p).decision);
  }
  EXPECT_EQ(jx, sx);
  EXPECT_EQ(jy, sy);
}

TEST(Calibrate, QuantileAndMax) {
  std::vector<double> r;
  for (int i = 1; i <= 100; ++i) r.push_back(i / 100.0);
  const auto c = calibrate(r, 0.99);
  EXPECT_DOUBLE_EQ(c.le, 0.99);
  EXPECT_DOUBLE_EQ(c.ue, 1.0);
  EXPECT_EQ(c.in_band, 1u);
  EXPECT_DOUBLE_EQ(c.p0, 0.01);
  EXPECT_THROW(calibrate({}), ParameterError);
}

}  // namespace
}  // namespace hmg
