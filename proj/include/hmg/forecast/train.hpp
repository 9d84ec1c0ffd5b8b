#pragma once

// Mini-batch Adam training of the recurrent forecaster and evaluation helpers.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "hmg/forecast/data.hpp"
#include "hmg/forecast/lstm.hpp"

namespace hmg::forecast {

struct AdamConfig {
  double learning_rate = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam over a flat parameter vector; `step` counts from 1.
inline void adam_update(std::span<double> p, std::span<const double> g, std::span<double> m, std::span<double> v,
                        long step, const AdamConfig& c) {
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
  for (std::size_t k = 0; k < p.size(); ++k) {
    m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
    v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
    p[k] -= c.learning_rate * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + c.epsilon);
  }
}

inline std::vector<std::span<double>> tensor_views(BlstmModel& m) {
  std::vector<std::span<double>> out;
  m.visit([&](const std::string&, auto& t) { out.emplace_back(t.data(), static_cast<std::size_t>(t.size())); });
  return out;
}

class Adam {
 public:
  Adam(const BlstmModel& like, AdamConfig c) : m_(like.zeros_like()), v_(like.zeros_like()), c_(c) {}

  void step(BlstmModel& model, BlstmModel& grad) {
    ++t_;
    auto p = tensor_views(model), g = tensor_views(grad), m = tensor_views(m_), v = tensor_views(v_);
    for (std::size_t k = 0; k < p.size(); ++k) adam_update(p[k], g[k], m[k], v[k], t_, c_);
  }

 private:
  BlstmModel m_, v_;
  AdamConfig c_;
  long t_ = 0;
};

struct TrainingConfig {
  int hidden = 32;
  int depth = 2;
  bool bidirectional = true;
  Readout readout = Readout::kFinalStep;
  int window = 14;
  bool day_of_week = true;
  int epochs = 40;
  int batch_size = 32;
  double dropout_rate = 0.0;
  double train_fraction = 0.8;
  AdamConfig adam;
  std::uint64_t seed = 1;

  void validate() const {
    if (epochs < 1) throw ContractViolation("training: epochs must be at least 1");
    if (batch_size < 1) throw ContractViolation("training: batch size must be positive");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ContractViolation("training: dropout rate outside [0,1)");
    if (hidden < 1 || depth < 1 || window < 1) throw ContractViolation("training: model sizes must be positive");
    if (adam.learning_rate < 0.0) throw ContractViolation("training: negative learning rate");
  }
  ModelShape shape() const { return {feature_count(day_of_week), hidden, depth, bidirectional, window, readout}; }

  /// Two 128-unit bidirectional layers with 0.3 dropout and 150 epochs.
  static TrainingConfig full_size() {
    TrainingConfig c;
    c.hidden = 128;
    c.dropout_rate = 0.3;
    c.epochs = 150;
    return c;
  }
};

/// Trains in place on the given window indices; returns the mean training
/// loss of each epoch, accumulated per window in index order so that the
/// history does not depend on the shuffle.
template <class Rng>
std::vector<double> fit(BlstmModel& model, const Dataset& data, std::span<const std::size_t> train_idx,
                        const TrainingConfig& cfg, Rng& rng) {
  cfg.validate();
  if (train_idx.empty()) throw DataError("train: no training windows");
  std::vector<std::size_t> order(train_idx.begin(), train_idx.end());
  std::vector<std::size_t> slot(data.windows(), 0);
  for (std::size_t k = 0; k < order.size(); ++k) slot[order[k]] = k;
  std::vector<double> per_window(order.size());
  Adam adam(model, cfg.adam);
  std::vector<double> history;
  for (int e = 0; e < cfg.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t s = 0; s < order.size(); s += static_cast<std::size_t>(cfg.batch_size)) {
      const auto n = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), order.size() - s);
      const std::span<const std::size_t> idx(order.data() + s, n);
      const auto batch = data.batch(idx);
      auto lg = loss_and_gradient(model, batch, cfg.dropout_rate, &rng);
      for (std::size_t j = 0; j < n; ++j) per_window[slot[idx[j]]] = lg.squared_errors(static_cast<Eigen::Index>(j));
      adam.step(model, lg.grad);
    }
    double sum = 0.0;
    for (double v : per_window) sum += v;
    history.push_back(sum / static_cast<double>(per_window.size()));
  }
  return history;
}

struct TrainResult {
  BlstmModel model;
  std::vector<double> loss_history;
  Dataset dataset;
  Split split;
};

/// Fits the scaler on the training hours, builds the windows, initializes and
/// trains a model. Deterministic for a given seed.
inline TrainResult train(const LoadSeries& series, const TrainingConfig& cfg) {
  cfg.validate();
  if (series.size() < static_cast<std::size_t>(cfg.window) + 1)
    throw DataError("train: series of " + std::to_string(series.size()) + " hours is shorter than window + 1");
  std::mt19937_64 rng(cfg.seed);
  TrainResult r;
  const auto probe = make_dataset(series, Scaler{}, cfg.window, cfg.day_of_week);
  r.split = chronological_split(probe, cfg.train_fraction);
  const Scaler scaler = fit_scaler(std::span<const double>(series.load_kw.data(), r.split.cut_hour));
  r.dataset = make_dataset(series, scaler, cfg.window, cfg.day_of_week);
  r.model = make_model(cfg.shape(), rng);
  r.model.scaler = scaler;
  r.model.day_of_week = cfg.day_of_week;
  r.loss_history = fit(r.model, r.dataset, r.split.train, cfg, rng);
  return r;
}

/// Predictions in kW for the given windows.
inline std::vector<double> predict(const BlstmModel& m, const Dataset& d, std::span<const std::size_t> idx,
                                   std::size_t chunk = 256) {
  std::vector<double> out;
  out.reserve(idx.size());
  for (std::size_t s = 0; s < idx.size(); s += chunk) {
    const auto n = std::min(chunk, idx.size() - s);
    const auto b = d.batch(idx.subspan(s, n));
    const Vec y = predict_batch(m, b.inputs);
    for (Eigen::Index j = 0; j < y.size(); ++j) out.push_back(m.scaler.invert(y(j)));
  }
  return out;
}

inline std::vector<double> actual(const BlstmModel& m, const Dataset& d, std::span<const std::size_t> idx) {
  std::vector<double> out;
  for (auto k : idx) out.push_back(m.scaler.invert(d.scaled(static_cast<Eigen::Index>(k + d.window))));
  return out;
}

inline Metrics evaluate(const BlstmModel& m, const Dataset& d, std::span<const std::size_t> idx) {
  const auto p = predict(m, d, idx);
  const auto a = actual(m, d, idx);
  return metrics(p, a);
}

/// One-hour-ahead forecast (kW) from the last `input_window` hours of a series.
inline double forecast_next(const BlstmModel& m, const LoadSeries& recent) {
  if (recent.size() < static_cast<std::size_t>(m.input_window))
    throw DataError("forecast_next: need " + std::to_string(m.input_window) + " hours of history");
  LoadSeries tail;
  const auto from = recent.size() - static_cast<std::size_t>(m.input_window);
  tail.timestamp.assign(recent.timestamp.begin() + static_cast<std::ptrdiff_t>(from), recent.timestamp.end());
  tail.load_kw.assign(recent.load_kw.begin() + static_cast<std::ptrdiff_t>(from), recent.load_kw.end());
  tail.timestamp.push_back(tail.timestamp.back() + 3600);
  tail.load_kw.push_back(tail.load_kw.back());  // placeholder target
  const auto d = make_dataset(tail, m.scaler, m.input_window, m.day_of_week);
  const std::size_t k = 0;
  return predict(m, d, std::span<const std::size_t>(&k, 1))[0];
}

}  // namespace hmg::forecast
