#pragma once

// Single-hidden-layer feed-forward reference model on the flattened window.

#include <random>
#include <vector>

#include "hmg/forecast/train.hpp"

namespace hmg::forecast {

struct MlpModel {
  Mat W1;  // hidden x (features * window)
  Vec b1;
  Mat W2;  // 1 x hidden
  Vec b2;
  Scaler scaler;
  int window = 14;
  bool day_of_week = true;

  template <class F>
  void visit(F&& f) {
    f("W1", W1), f("b1", b1), f("W2", W2), f("b2", b2);
  }
};

inline Mat flatten(const Batch& b) {
  const auto F = b.inputs[0].rows();
  Mat x(F * static_cast<Eigen::Index>(b.inputs.size()), b.size());
  for (std::size_t t = 0; t < b.inputs.size(); ++t) x.middleRows(static_cast<Eigen::Index>(t) * F, F) = b.inputs[t];
  return x;
}

inline Vec mlp_predict(const MlpModel& m, const Batch& b) {
  Mat a = m.W1 * flatten(b);
  a.colwise() += m.b1;
  const Mat y = m.W2 * a.array().tanh().matrix();
  return (y.row(0).array() + m.b2(0)).matrix().transpose();
}

struct MlpResult {
  MlpModel model;
  std::vector<double> loss_history;
  Dataset dataset;
  Split split;
};

/// Same data pipeline, optimizer and epochs as the recurrent model.
inline MlpResult train_mlp(const LoadSeries& series, const TrainingConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  MlpResult r;
  const auto probe = make_dataset(series, Scaler{}, cfg.window, cfg.day_of_week);
  r.split = chronological_split(probe, cfg.train_fraction);
  const Scaler scaler = fit_scaler(std::span<const double>(series.load_kw.data(), r.split.cut_hour));
  r.dataset = make_dataset(series, scaler, cfg.window, cfg.day_of_week);
  auto& m = r.model;
  const auto in = static_cast<Eigen::Index>(feature_count(cfg.day_of_week) * cfg.window);
  const auto H = static_cast<Eigen::Index>(cfg.hidden);
  m.scaler = scaler;
  m.window = cfg.window;
  m.day_of_week = cfg.day_of_week;
  auto init = [&](Eigen::Index rows, Eigen::Index cols, double fan_in) {
    std::uniform_real_distribution<double> u(-1.0 / std::sqrt(fan_in), 1.0 / std::sqrt(fan_in));
    Mat t(rows, cols);
    for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = u(rng);
    return t;
  };
  m.W1 = init(H, in, static_cast<double>(in));
  m.b1 = init(H, 1, static_cast<double>(in));
  m.W2 = init(1, H, static_cast<double>(H));
  m.b2 = init(1, 1, static_cast<double>(H));

  MlpModel mom = m, vel = m;
  for (auto* z : {&mom, &vel}) z->visit([](const std::string&, auto& t) { t.setZero(); });
  long step = 0;
  std::vector<std::size_t> order = r.split.train;
  for (int e = 0; e < cfg.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    for (std::size_t s = 0; s < order.size(); s += static_cast<std::size_t>(cfg.batch_size)) {
      const auto n = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), order.size() - s);
      const auto b = r.dataset.batch(std::span<const std::size_t>(order.data() + s, n));
      const Mat x = flatten(b);
      Mat a = m.W1 * x;
      a.colwise() += m.b1;
      const Mat h = a.array().tanh().matrix();
      const Vec y = (m.W2 * h).row(0).transpose().array() + m.b2(0);
      const Vec err = y - b.targets;
      sum += err.squaredNorm();
      const Eigen::RowVectorXd dy = (2.0 / static_cast<double>(n)) * err.transpose();
      MlpModel g = m;
      g.W2 = dy * h.transpose();
      g.b2 = Vec::Constant(1, dy.sum());
      const Mat da = ((m.W2.transpose() * dy).array() * (1.0 - h.array().square())).matrix();
      g.W1 = da * x.transpose();
      g.b1 = da.rowwise().sum();
      ++step;
      std::vector<std::span<double>> p, gv, mv, vv;
      auto views = [](MlpModel& mm, std::vector<std::span<double>>& out) {
        mm.visit([&](const std::string&, auto& t) { out.emplace_back(t.data(), static_cast<std::size_t>(t.size())); });
      };
      views(m, p), views(g, gv), views(mom, mv), views(vel, vv);
      for (std::size_t k = 0; k < p.size(); ++k) adam_update(p[k], gv[k], mv[k], vv[k], step, cfg.adam);
    }
    r.loss_history.push_back(sum / static_cast<double>(order.size()));
  }
  return r;
}

inline Metrics evaluate(const MlpModel& m, const Dataset& d, std::span<const std::size_t> idx) {
  const auto b = d.batch(idx);
  const Vec y = mlp_predict(m, b);
  std::vector<double> p, a;
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    p.push_back(m.scaler.invert(y(j)));
    a.push_back(m.scaler.invert(b.targets(j)));
  }
  return metrics(p, a);
}

}  // namespace hmg::forecast
