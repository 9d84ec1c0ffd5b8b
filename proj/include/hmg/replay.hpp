#pragma once

// End-to-end detection replay: each meter-hour is forecast from the meter's
// reported history and fed to the sequential detector.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hmg/attack.hpp"
#include "hmg/detector.hpp"
#include "hmg/forecast/train.hpp"

namespace hmg::attack {

class ConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MeterStream {
  std::string meter_id;
  forecast::LoadSeries reported;  // what reached the control centre
  std::vector<char> tampered;     // optional per-hour ground truth
};

/// Hours [first, first + count) of a series scaled by (1 - rho) or (1 + rho).
inline MeterStream tamper_stream(std::string meter_id, const forecast::LoadSeries& truth, std::size_t first,
                                 std::size_t count, double severity, Direction direction) {
  if (!(severity >= 0.0 && severity <= 1.0)) throw ValidationError("tamper: severity must lie in [0,1]");
  MeterStream m{std::move(meter_id), truth, std::vector<char>(truth.size(), 0)};
  const double f = direction == Direction::kReduce ? 1.0 - severity : 1.0 + severity;
  for (std::size_t h = first; h < first + count && h < truth.size(); ++h) {
    m.reported.load_kw[h] *= f;
    m.tampered[h] = 1;
  }
  return m;
}

struct ReplayRow {
  std::string meter_id;
  std::size_t hour = 0;  // index into the meter's series
  std::int64_t timestamp = 0;
  double measured = 0.0;
  double forecast = 0.0;
  double ratio = 0.0;  // |measured - forecast| / forecast
  Sample sample = Sample::kZero;
  Decision decision = Decision::kContinue;
  double log_ratio = 0.0;
  bool tampered = false;
};

/// One-hour-ahead forecasts for hours window..end of a series.
inline std::vector<double> rolling_forecasts(const forecast::BlstmModel& model, const forecast::LoadSeries& s) {
  const auto d = forecast::make_dataset(s, model.scaler, model.input_window, model.day_of_week);
  std::vector<std::size_t> idx(d.windows());
  for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
  return forecast::predict(model, d, idx);
}

/// Clean residual ratios over hours [from, to) for LE/UE/P0 calibration.
inline std::vector<double> residual_ratios(const forecast::BlstmModel& model, const forecast::LoadSeries& s,
                                           std::size_t from, std::size_t to) {
  const auto w = static_cast<std::size_t>(model.input_window);
  const auto f = rolling_forecasts(model, s);
  std::vector<double> out;
  for (std::size_t h = std::max(from, w); h < std::min(to, s.size()); ++h) {
    const double fc = f[h - w];
    if (fc > 0.0) out.push_back(std::abs(s.load_kw[h] - fc) / fc);
  }
  return out;
}

struct ReplayOptions {
  std::size_t from = 0;  // first hour fed to the detector (at least the model window)
  // Suspicious readings (sample not 0) enter the forecaster's input history as
  // their forecast until the detector's walk ends: NoAttack releases them,
  // Attack keeps them out. A sustained attack then cannot drag the forecast
  // along with it.
  bool gate_history = true;
};

/// Hour-major replay over all streams. Detector state lives in `registry`, so
/// a replay can resume.
inline std::vector<ReplayRow> detection_pipeline_replay(std::span<const MeterStream> streams,
                                                        const forecast::BlstmModel& model,
                                                        const DetectorParams& params, DetectorRegistry& registry,
                                                        const ReplayOptions& opt = {}) {
  if (model.layers.empty() || model.input_window < 1)
    throw ConfigurationError("detection replay: no forecaster model loaded");
  params.validate();
  const auto w = static_cast<std::size_t>(model.input_window);
  std::vector<forecast::LoadSeries> history;
  std::vector<std::vector<std::size_t>> quarantined(streams.size());
  std::size_t end = 0;
  for (const auto& m : streams) {
    if (!m.tampered.empty() && m.tampered.size() != m.reported.size())
      throw ContractViolation("detection replay: tamper mask length differs for " + m.meter_id);
    if (m.reported.timestamp.size() != m.reported.load_kw.size())
      throw ContractViolation("detection replay: timestamp/load length mismatch for " + m.meter_id);
    history.push_back(m.reported);
    end = std::max(end, m.reported.size());
  }
  std::vector<ReplayRow> log;
  forecast::LoadSeries tail;
  for (std::size_t h = std::max(opt.from, w); h < end; ++h) {
    for (std::size_t j = 0; j < streams.size(); ++j) {
      const auto& m = streams[j];
      if (h >= m.reported.size()) continue;
      auto& hist = history[j];
      tail.timestamp.assign(hist.timestamp.begin() + static_cast<std::ptrdiff_t>(h - w),
                            hist.timestamp.begin() + static_cast<std::ptrdiff_t>(h));
      tail.load_kw.assign(hist.load_kw.begin() + static_cast<std::ptrdiff_t>(h - w),
                          hist.load_kw.begin() + static_cast<std::ptrdiff_t>(h));
      ReplayRow row;
      row.meter_id = m.meter_id;
      row.hour = h;
      row.timestamp = m.reported.timestamp[h];
      row.measured = m.reported.load_kw[h];
      row.forecast = forecast::forecast_next(model, tail);
      row.tampered = !m.tampered.empty() && m.tampered[h];
      if (!(row.forecast > 0.0))
        throw ConfigurationError("detection replay: non-positive forecast for " + m.meter_id + " at hour " +
                                 std::to_string(h));
      const auto obs = process_measurement(m.meter_id, row.measured, row.forecast, registry, params);
      row.ratio = obs.residual / row.forecast;
      row.sample = obs.sample;
      row.decision = obs.decision;
      row.log_ratio = obs.log_ratio;
      if (opt.gate_history) {
        auto& held = quarantined[j];
        if (obs.sample != Sample::kZero) {
          hist.load_kw[h] = row.forecast;
          held.push_back(h);
        }
        if (obs.decision == Decision::kNoAttack)
          for (auto k : held) hist.load_kw[k] = m.reported.load_kw[k];
        if (is_terminal(obs.decision)) held.clear();
      }
      log.push_back(std::move(row));
    }
  }
  return log;
}

inline std::vector<ReplayRow> detection_pipeline_replay(std::span<const MeterStream> streams,
                                                        const forecast::BlstmModel& model,
                                                        const DetectorParams& params, const ReplayOptions& opt = {}) {
  DetectorRegistry registry;
  return detection_pipeline_replay(streams, model, params, registry, opt);
}

}  // namespace hmg::attack
