#pragma once

// Residual-based attack detection: binarize the forecast residual ratio and
// run a per-meter Wald sequential probability ratio test on the samples.

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "hmg/grid_model.hpp"

namespace hmg {

class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Thresholds {
  double ln_l = 0.0;
  double ln_u = 0.0;
};

/// ln_u = ln((1-beta)/alpha), ln_l = ln(beta/(1-alpha)).
inline Thresholds thresholds(double alpha, double beta) {
  if (!(alpha > 0.0 && alpha < 1.0) || !(beta > 0.0 && beta < 1.0))
    throw ParameterError("thresholds: alpha and beta must lie in (0,1)");
  return {std::log(beta / (1.0 - alpha)), std::log((1.0 - beta) / alpha)};
}

struct DetectorParams {
  double le = 0.08;
  double ue = 24.59;
  double p0 = 0.0094;
  double p1 = 0.99;
  double alpha = 0.001;
  double beta = 0.002;

  void validate() const {
    if (!(le > 0.0 && le < ue)) throw ParameterError("detector: need 0 < LE < UE");
    if (!(p0 > 0.0 && p0 < p1 && p1 < 1.0)) throw ParameterError("detector: need 0 < P0 < P1 < 1");
    if (!(alpha > 0.0 && alpha < 1.0 && beta > 0.0 && beta < 1.0 && alpha + beta < 1.0))
      throw ParameterError("detector: need alpha, beta in (0,1) with alpha + beta < 1");
    const auto t = thresholds(alpha, beta);
    if (!(t.ln_l < 0.0 && 0.0 < t.ln_u)) throw ParameterError("detector: degenerate thresholds");
  }
  double ln_l() const { return thresholds(alpha, beta).ln_l; }
  double ln_u() const { return thresholds(alpha, beta).ln_u; }
  double log_ratio_one() const { return std::log(p1 / p0); }
  double log_ratio_zero() const { return std::log((1.0 - p1) / (1.0 - p0)); }
};

inline double residual(double measured, double forecast) {
  if (!(forecast > 0.0)) throw ParameterError("residual: forecast must be positive");
  return std::abs(measured - forecast);
}

enum class Sample { kZero, kOne, kDirectAttack };

inline Sample binarize(double e, double forecast, const DetectorParams& p) {
  if (!(forecast > 0.0)) throw ParameterError("binarize: forecast must be positive");
  const double r = e / forecast;
  if (r <= p.le) return Sample::kZero;
  if (r <= p.ue) return Sample::kOne;
  return Sample::kDirectAttack;
}

enum class Decision { kContinue, kNoAttack, kAttack, kDirectAttack };

inline const char* to_string(Decision d) {
  switch (d) {
    case Decision::kContinue: return "No decision";
    case Decision::kNoAttack: return "No attack";
    case Decision::kAttack: return "Attack";
    case Decision::kDirectAttack: return "Direct attack";
  }
  return "?";
}

inline bool is_terminal(Decision d) { return d != Decision::kContinue; }

/// Random-walk state of one meter. The log ratio is a function of the counts
/// only, so it is recomputed from (n, m) rather than accumulated.
struct SprtState {
  std::string meter_id;
  double cumulative_log_ratio = 0.0;
  long n = 0;
  long m = 0;
};

inline double log_ratio(long n, long m, const DetectorParams& p) {
  return static_cast<double>(m) * p.log_ratio_one() + static_cast<double>(n - m) * p.log_ratio_zero();
}

struct StepResult {
  Decision decision = Decision::kContinue;
  double log_ratio = 0.0;  // PR_T at the time of the decision, before any reset
  SprtState state;
};

inline StepResult sprt_step(const SprtState& state, int sample, const DetectorParams& p) {
  if (sample != 0 && sample != 1) throw ContractViolation("sprt_step: sample must be 0 or 1");
  SprtState next = state;
  next.n += 1;
  next.m += sample;
  next.cumulative_log_ratio = log_ratio(next.n, next.m, p);
  StepResult out{Decision::kContinue, next.cumulative_log_ratio, next};
  const auto t = thresholds(p.alpha, p.beta);
  if (next.cumulative_log_ratio <= t.ln_l)
    out.decision = Decision::kNoAttack;
  else if (next.cumulative_log_ratio >= t.ln_u)
    out.decision = Decision::kAttack;
  if (is_terminal(out.decision)) out.state = SprtState{state.meter_id, 0.0, 0, 0};
  return out;
}

enum class Hypothesis { kH0, kH1 };

/// Wald's approximation of the mean number of samples to a decision.
inline double expected_samples(const DetectorParams& p, Hypothesis h) {
  if (p.p0 == p.p1) throw ParameterError("expected_samples: P0 equals P1");
  const auto t = thresholds(p.alpha, p.beta);
  const double a = p.log_ratio_one(), b = p.log_ratio_zero();
  if (h == Hypothesis::kH0)
    return ((1.0 - p.alpha) * t.ln_l + p.alpha * t.ln_u) / (p.p0 * a + (1.0 - p.p0) * b);
  return (p.beta * t.ln_l + (1.0 - p.beta) * t.ln_u) / (p.p1 * a + (1.0 - p.p1) * b);
}

struct Observation {
  Decision decision = Decision::kContinue;
  Sample sample = Sample::kZero;
  double residual = 0.0;
  double log_ratio = 0.0;
};

/// Per-meter state store. Unknown meters start from a blank state.
class DetectorRegistry {
 public:
  SprtState& state(const std::string& meter_id) {
    auto it = states_.find(meter_id);
    if (it == states_.end()) it = states_.emplace(meter_id, SprtState{meter_id, 0.0, 0, 0}).first;
    return it->second;
  }
  bool contains(const std::string& meter_id) const { return states_.count(meter_id) != 0; }
  const std::map<std::string, SprtState>& states() const { return states_; }
  void restore(const SprtState& s) { states_[s.meter_id] = s; }

 private:
  std::map<std::string, SprtState> states_;
};

inline Observation process_measurement(const std::string& meter_id, double measured, double forecast,
                                       DetectorRegistry& registry, const DetectorParams& p) {
  auto& st = registry.state(meter_id);
  Observation obs;
  obs.residual = residual(measured, forecast);
  obs.sample = binarize(obs.residual, forecast, p);
  if (obs.sample == Sample::kDirectAttack) {
    st = SprtState{meter_id, 0.0, 0, 0};
    obs.decision = Decision::kDirectAttack;
    return obs;
  }
  const auto r = sprt_step(st, obs.sample == Sample::kOne ? 1 : 0, p);
  st = r.state;
  obs.decision = r.decision;
  obs.log_ratio = r.log_ratio;
  return obs;
}

/// LE/UE/P0 from a history of clean residual ratios e/forecast. LE is the
/// smallest ratio at or below which `coverage` of the samples fall, UE the
/// largest ratio seen, and P0 the fraction of samples in (LE, UE].
struct Calibration {
  double le = 0.0;
  double ue = 0.0;
  double p0 = 0.0;
  std::size_t samples = 0;
  std::size_t in_band = 0;
};

inline Calibration calibrate(std::vector<double> ratios, double coverage = 0.99) {
  if (ratios.empty()) throw ParameterError("calibrate: empty residual history");
  if (!(coverage > 0.0 && coverage < 1.0)) throw ParameterError("calibrate: coverage must lie in (0,1)");
  for (double r : ratios)
    if (!(r >= 0.0) || !std::isfinite(r)) throw ParameterError("calibrate: ratios must be finite and non-negative");
  std::sort(ratios.begin(), ratios.end());
  const auto n = ratios.size();
  auto k = static_cast<std::size_t>(std::ceil(coverage * static_cast<double>(n)));
  k = std::clamp<std::size_t>(k, 1, n);
  Calibration c;
  c.le = ratios[k - 1];
  c.ue = ratios.back();
  c.samples = n;
  c.in_band = static_cast<std::size_t>(std::count_if(ratios.begin(), ratios.end(),
                                                     [&](double r) { return r > c.le && r <= c.ue; }));
  c.p0 = static_cast<double>(c.in_band) / static_cast<double>(n);
  return c;
}

}  // namespace hmg
