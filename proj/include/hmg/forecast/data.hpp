#pragma once

// Hourly load series, the seeded synthetic generator, windowed datasets with
// day-of-week features, and forecast error metrics.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hmg/csv.hpp"
#include "hmg/forecast/lstm.hpp"

namespace hmg::forecast {

struct LoadSeries {
  std::vector<std::int64_t> timestamp;  // unix seconds, hourly
  std::vector<double> load_kw;

  std::size_t size() const { return load_kw.size(); }
};

/// 0 = Monday ... 6 = Sunday.
inline int day_of_week(std::int64_t unix_seconds) {
  const std::int64_t days = unix_seconds >= 0 ? unix_seconds / 86400 : -((-unix_seconds + 86399) / 86400);
  return static_cast<int>(((days + 3) % 7 + 7) % 7);
}

inline int hour_of_day(std::int64_t unix_seconds) {
  return static_cast<int>(((unix_seconds % 86400) + 86400) % 86400 / 3600);
}

namespace detail {

// Days since 1970-01-01 for a proleptic Gregorian date.
inline std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

}  // namespace detail

/// Unix seconds, or ISO "YYYY-MM-DDTHH:MM[:SS]" (a space may replace the T), UTC.
inline std::int64_t parse_timestamp(const std::string& s) {
  long long v = 0;
  if (csv::parse_int(s, v)) return v;
  int y, mo, d, h, mi, sec = 0;
  char sep;
  const int n = std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d:%d", &y, &mo, &d, &sep, &h, &mi, &sec);
  if (n < 6 || (sep != 'T' && sep != ' ') || mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi < 0 ||
      mi > 59 || sec < 0 || sec > 60)
    throw ParseError("bad timestamp '" + s + "'");
  return detail::days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d)) * 86400 + h * 3600 +
         mi * 60 + sec;
}

/// CSV with columns timestamp,load_kw.
inline LoadSeries read_load_csv(std::istream& in) {
  const auto t = csv::read(in);
  const int ct = t.column("timestamp"), cl = t.column("load_kw");
  if (ct < 0 || cl < 0) throw ParseError("load csv: need columns timestamp,load_kw");
  LoadSeries s;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    s.timestamp.push_back(parse_timestamp(t.rows[r][static_cast<std::size_t>(ct)]));
    const double v = csv::field_double(t, r, cl, "load_kw");
    if (!std::isfinite(v) || v < 0.0) throw ParseError("load csv: line " + std::to_string(t.line_numbers[r]) +
                                                        ": load_kw must be finite and non-negative");
    s.load_kw.push_back(v);
  }
  return s;
}

inline LoadSeries read_load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  return read_load_csv(in);
}

inline void write_load_csv(std::ostream& out, const LoadSeries& s) {
  out << "timestamp,load_kw\n";
  char buf[64];
  for (std::size_t k = 0; k < s.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%lld,%.6f\n", static_cast<long long>(s.timestamp[k]), s.load_kw[k]);
    out << buf;
  }
}

struct SyntheticLoadConfig {
  int days = 70;
  double base_kw = 3000.0;
  double daily_amplitude = 0.25;
  double weekend_drop = 0.12;
  double noise_sd = 0.02;  // stationary sd of the multiplicative AR(1) noise
  double ar = 0.8;
  std::uint64_t seed = 1;
  std::int64_t start = 1704067200;  // 2024-01-01 00:00 UTC, a Monday
};

/// Daily double-peak profile, weekend reduction, and AR(1) multiplicative noise.
inline LoadSeries synthetic_load(const SyntheticLoadConfig& c) {
  if (c.days < 1 || !(c.base_kw > 0.0) || c.noise_sd < 0.0 || !(std::abs(c.ar) < 1.0))
    throw ContractViolation("synthetic_load: bad configuration");
  std::mt19937_64 rng(c.seed);
  std::normal_distribution<double> z(0.0, 1.0);
  const double innovation = c.noise_sd * std::sqrt(1.0 - c.ar * c.ar);
  LoadSeries s;
  double noise = c.noise_sd * z(rng);
  for (int k = 0; k < c.days * 24; ++k) {
    const std::int64_t ts = c.start + static_cast<std::int64_t>(k) * 3600;
    const double h = hour_of_day(ts);
    const double w = 2.0 * std::numbers::pi * (h - 8.0) / 24.0;
    const double shape = 1.0 + c.daily_amplitude * (0.7 * std::sin(w) - 0.35 * std::cos(2.0 * w));
    const double week = day_of_week(ts) >= 5 ? 1.0 - c.weekend_drop : 1.0;
    s.timestamp.push_back(ts);
    s.load_kw.push_back(c.base_kw * shape * week * (1.0 + noise));
    noise = c.ar * noise + innovation * z(rng);
  }
  return s;
}

inline Scaler fit_scaler(std::span<const double> values) {
  if (values.empty()) throw DataError("fit_scaler: no values");
  Scaler s{values[0], values[0]};
  for (double v : values) {
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
  }
  if (s.max == s.min) s.max = s.min + 1.0;
  return s;
}

inline int feature_count(bool day_of_week_features) { return day_of_week_features ? 8 : 1; }

/// Per-hour features and scaled targets. Window k covers hours k..k+W-1 and
/// predicts hour k+W.
struct Dataset {
  Mat features;  // (features x hours)
  Vec scaled;    // scaled load per hour
  int window = 14;

  std::size_t hours() const { return static_cast<std::size_t>(scaled.size()); }
  std::size_t windows() const { return hours() > static_cast<std::size_t>(window) ? hours() - window : 0; }

  Batch batch(std::span<const std::size_t> idx) const {
    Batch b;
    const auto B = static_cast<Eigen::Index>(idx.size());
    b.inputs.assign(static_cast<std::size_t>(window), Mat(features.rows(), B));
    b.targets.resize(B);
    for (Eigen::Index j = 0; j < B; ++j) {
      const auto k = idx[static_cast<std::size_t>(j)];
      if (k >= windows()) throw ContractViolation("dataset: window index out of range");
      for (int t = 0; t < window; ++t) b.inputs[static_cast<std::size_t>(t)].col(j) = features.col(k + t);
      b.targets(j) = scaled(static_cast<Eigen::Index>(k + window));
    }
    return b;
  }
};

inline Dataset make_dataset(const LoadSeries& s, const Scaler& scaler, int window, bool day_of_week_features) {
  if (s.timestamp.size() != s.load_kw.size()) throw DataError("dataset: timestamp/load length mismatch");
  if (window < 1) throw DataError("dataset: window must be positive");
  if (s.size() < static_cast<std::size_t>(window) + 1)
    throw DataError("dataset: " + std::to_string(s.size()) + " hours is shorter than window + 1 = " +
                    std::to_string(window + 1));
  Dataset d;
  d.window = window;
  const auto n = static_cast<Eigen::Index>(s.size());
  d.features = Mat::Zero(feature_count(day_of_week_features), n);
  d.scaled.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto u = static_cast<std::size_t>(k);
    d.scaled(k) = scaler.apply(s.load_kw[u]);
    d.features(0, k) = d.scaled(k);
    if (day_of_week_features) d.features(1 + day_of_week(s.timestamp[u]), k) = 1.0;
  }
  return d;
}

/// Chronological split: windows whose target lies in the first `train_fraction`
/// of the hours train, the rest test.
struct Split {
  std::vector<std::size_t> train, test;
  std::size_t cut_hour = 0;
};

inline Split chronological_split(const Dataset& d, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw DataError("split: fraction must lie in (0,1)");
  Split sp;
  sp.cut_hour = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(d.hours())));
  for (std::size_t k = 0; k < d.windows(); ++k)
    (k + static_cast<std::size_t>(d.window) < sp.cut_hour ? sp.train : sp.test).push_back(k);
  if (sp.train.empty() || sp.test.empty()) throw DataError("split: empty train or test set");
  return sp;
}

struct Metrics {
  double mape = 0.0;  // percent, over non-zero actuals
  double mae = 0.0;
  double rmse = 0.0;
  std::size_t zero_actuals = 0;  // excluded from MAPE
};

inline Metrics metrics(std::span<const double> predicted, std::span<const double> actual) {
  if (predicted.size() != actual.size()) throw ContractViolation("metrics: length mismatch");
  if (actual.empty()) throw ContractViolation("metrics: empty series");
  Metrics m;
  double ape = 0.0, ae = 0.0, se = 0.0;
  for (std::size_t k = 0; k < actual.size(); ++k) {
    const double e = predicted[k] - actual[k];
    ae += std::abs(e);
    se += e * e;
    if (actual[k] == 0.0)
      ++m.zero_actuals;
    else
      ape += std::abs(e / actual[k]);
  }
  const double n = static_cast<double>(actual.size());
  m.mae = ae / n;
  m.rmse = std::sqrt(se / n);
  const auto counted = actual.size() - m.zero_actuals;
  m.mape = counted ? 100.0 * ape / static_cast<double>(counted) : std::nan("");
  return m;
}

}  // namespace hmg::forecast
