// hmgsim: batch scenario runner for the hybrid-microgrid toolkit.
//
//   hmgsim schedule       day-ahead unit commitment and dispatch
//   hmgsim attack         false-data injection and its load-shedding impact
//   hmgsim train          forecaster training and test metrics
//   hmgsim detect         sequential detector decision log
//   hmgsim calibrate      LE/UE/P0 from clean residuals
//   hmgsim codec-inspect  field-by-field dump of a hex frame
//
// Exit status: 0 success, 1 invalid input, 2 runtime failure.

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hmg/attack.hpp"
#include "hmg/bundled.hpp"
#include "hmg/detector.hpp"
#include "hmg/forecast/baseline.hpp"
#include "hmg/forecast/checkpoint.hpp"
#include "hmg/forecast/train.hpp"
#include "hmg/grid_io.hpp"
#include "hmg/lora/fragment.hpp"
#include "hmg/lora/hex.hpp"
#include "hmg/lora/mac.hpp"
#include "hmg/lora/phy.hpp"
#include "hmg/replay.hpp"
#include "hmg/report.hpp"
#include "hmg/schedule_io.hpp"
#include "hmg/scheduler.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace hmg;

namespace {

// Failures that are not the input's fault: a power flow that does not
// converge, an output that cannot be written.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string network, scenario, attack_spec, model, params, load, schedule, commitment, pairs, ratios;
  std::string out = ".";
  std::string format = "csv";
  std::string frame = "auto";
  std::string input;
  std::optional<std::uint64_t> seed;
};

std::string need_file(const std::string& path) {
  if (!fs::is_regular_file(path)) throw ValidationError("missing file: " + path);
  return read_text_file(path);
}

std::uint64_t resolve_seed(const Options& o) {
  if (o.seed) return *o.seed;
  if (const char* env = std::getenv("HMG_SEED")) {
    long long v = 0;
    if (!csv::parse_int(env, v) || v < 0) throw ValidationError(std::string("HMG_SEED is not a seed: ") + env);
    return static_cast<std::uint64_t>(v);
  }
  return 1;
}

/// --params JSON restricted to the keys a subcommand understands.
json load_params(const Options& o, const std::set<std::string>& allowed) {
  if (o.params.empty()) return json::object();
  json j;
  try {
    j = json::parse(need_file(o.params));
  } catch (const json::parse_error& e) {
    throw ParseError(o.params + ": " + e.what());
  }
  if (!j.is_object()) throw ParseError(o.params + ": expected a JSON object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ValidationError(o.params + ": unknown parameter '" + k + "'");
  return j;
}

template <class T>
T param(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("parameter '") + key + "' has the wrong type");
  }
}

Network network_of(const Options& o) { return o.network.empty() ? bundled::ieee33_hmg() : load_network(need_file(o.network)); }

Scenario scenario_of(const Options& o, const json& p) {
  const ScenarioOptions so{param(p, "reserve_fraction", 0.05), param(p, "ens_penalty", 4.0)};
  if (o.scenario.empty()) return bundled::daily_scenario(so.reserve_fraction, so.ens_penalty);
  return load_scenario(need_file(o.scenario), so);
}

std::string file_digest(const std::string& path) { return path.empty() ? "bundled" : report::config_hash(need_file(path)); }

class Emitter {
 public:
  Emitter(const Options& o, std::uint64_t seed, std::string config_sha)
      : dir_(o.out), ext_(o.format == "json" ? ".json" : ".csv"), seed_(seed), sha_(std::move(config_sha)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) throw RuntimeFailure("cannot create output directory " + dir_.string());
  }
  report::Table table(std::string kind, std::vector<report::Column> cols) const {
    report::Table t;
    t.kind = std::move(kind);
    t.seed = seed_;
    t.config_sha256 = sha_;
    t.columns = std::move(cols);
    return t;
  }
  std::string write(const std::string& stem, const report::Table& t) const {
    const auto path = (dir_ / (stem + ext_)).string();
    try {
      report::write_file(path, t);
    } catch (const std::runtime_error& e) {
      throw RuntimeFailure(e.what());
    }
    std::cout << "wrote " << path << "\n";
    return path;
  }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::string ext_;
  std::uint64_t seed_;
  std::string sha_;
};

std::string hash_config(const json& c) { return report::config_hash(c.dump()); }

// ---------------------------------------------------------------------------

int run_schedule(const Options& o) {
  const auto p = load_params(o, {"population_size", "iterations", "threads", "balance_iterations", "reserve_fraction",
                                 "ens_penalty"});
  const auto seed = resolve_seed(o);
  const auto net = network_of(o);
  const auto sc = scenario_of(o, p);
  OptimizerConfig cfg;
  cfg.seed = seed;
  cfg.population_size = param(p, "population_size", cfg.population_size);
  cfg.iterations = param(p, "iterations", cfg.iterations);
  cfg.threads = param(p, "threads", cfg.threads);
  cfg.balance_iterations = param(p, "balance_iterations", cfg.balance_iterations);
  const json config{{"subcommand", "schedule"},  {"seed", seed},          {"network", file_digest(o.network)},
                    {"scenario", file_digest(o.scenario)}, {"params", p}};
  Emitter em(o, seed, hash_config(config));

  const auto r = optimize(sc, net, cfg);
  std::vector<PowerFlowResult> flows;
  const auto report = evaluate_constraints(r.schedule, sc, net, cfg.evaluation, &flows);
  for (std::size_t t = 0; t < flows.size(); ++t)
    if (!flows[t].converged) throw RuntimeFailure("power flow did not converge at hour " + std::to_string(t + 1));

  const auto names = schedule_columns(net);
  std::vector<report::Column> kw_cols{{"hour"}}, u_cols{{"hour"}};
  for (std::size_t c = 1; c < names.size(); ++c) {
    kw_cols.push_back({names[c], 2});
    if (c + 1 < names.size()) u_cols.push_back({names[c]});
  }
  auto dispatch = em.table("schedule", kw_cols);
  auto commit = em.table("commitment", u_cols);
  auto hourly = em.table("schedule-hourly", {{"hour"},
                                             {"loss_kw", 3},
                                             {"max_voltage_deviation_pu", 6},
                                             {"min_voltage_pu", 6},
                                             {"slack_kw", 3},
                                             {"cost_cum", 2}});
  const auto units = schedule_units(net, r.schedule);
  double total_loss = 0.0, max_dev = 0.0;
  for (std::size_t t = 0; t < r.schedule.horizon(); ++t) {
    std::vector<report::Cell> row{static_cast<long long>(t + 1)}, urow = row;
    for (std::size_t k = 0; k < r.schedule.units(); ++k) {
      row.emplace_back(r.schedule.u[t][k] * r.schedule.p_g[t][k]);
      urow.emplace_back(static_cast<long long>(r.schedule.u[t][k]));
    }
    row.emplace_back(r.schedule.p_conv[t]);
    dispatch.add(row);
    commit.add(urow);
    const auto& pf = flows[t];
    double vmin = 2.0;
    for (std::size_t b = 0; b < pf.v_mag.size(); ++b)
      if (net.buses()[b].subgrid == Subgrid::kAc) vmin = std::min(vmin, pf.v_mag[b]);
    Schedule upto = r.schedule;
    upto.p_g.resize(t + 1);
    upto.u.resize(t + 1);
    upto.p_conv.resize(t + 1);
    hourly.add({static_cast<long long>(t + 1), pf.total_loss, pf.max_voltage_deviation(net), vmin, pf.slack_p,
                operating_cost(upto, units, cfg.evaluation.initial.u)});
    total_loss += pf.total_loss;
    max_dev = std::max(max_dev, pf.max_voltage_deviation(net));
  }
  auto summary = em.table("schedule-summary", {{"total_loss_kwh", 3},
                                               {"operating_cost", 2},
                                               {"max_voltage_deviation_pu", 6},
                                               {"feasible"},
                                               {"violations"},
                                               {"fitness", 2}});
  summary.add({total_loss, r.cost, max_dev, static_cast<long long>(report.feasible()),
               static_cast<long long>(report.items.size()), r.fitness});
  em.write("schedule", dispatch);
  em.write("commitment", commit);
  em.write("hourly", hourly);
  em.write("summary", summary);
  if (!report.feasible())
    std::cerr << "warning: best schedule violates " << report.items.size() << " constraint(s); see summary\n";
  return 0;
}

// ---------------------------------------------------------------------------

int run_attack(const Options& o) {
  const auto p = load_params(o, {"restart_delay_hours", "reserve_fraction", "ens_penalty"});
  const auto seed = resolve_seed(o);
  const auto net = network_of(o);
  const auto sc = scenario_of(o, p);
  const auto spec = o.attack_spec.empty() ? bundled::reference_attack() : attack::load_attack_spec([&] {
    need_file(o.attack_spec);
    return o.attack_spec;
  }());
  Schedule base;
  if (!o.schedule.empty())
    base = read_schedule_csv(need_file(o.schedule), net, o.commitment.empty() ? "" : need_file(o.commitment));
  else
    base = bundled::reference_schedule(net);
  if (base.horizon() != sc.horizon())
    throw ValidationError("schedule has " + std::to_string(base.horizon()) + " hours, scenario " +
                          std::to_string(sc.horizon()));
  attack::AttackParams ap;
  ap.restart_delay_hours = param(p, "restart_delay_hours", ap.restart_delay_hours);
  if (ap.restart_delay_hours < 1) throw ValidationError("restart_delay_hours must be at least 1");
  const json config{{"subcommand", "attack"},
                    {"seed", seed},
                    {"network", file_digest(o.network)},
                    {"scenario", file_digest(o.scenario)},
                    {"schedule", file_digest(o.schedule)},
                    {"commitment", file_digest(o.commitment)},
                    {"attack", attack::to_json(spec)},
                    {"params", p}};
  Emitter em(o, seed, hash_config(config));
  const auto r = attack::run_attack_scenario(sc, net, base, spec, ap);

  // dc-side units, the converter, then ac-side units, each in id order
  struct Source {
    std::string name;
    int unit = -1, res = -1;  // position in p_g / res_kw
  };
  std::vector<Source> dc, ac;
  std::vector<const DGUnit*> sorted;
  for (const auto& u : net.units()) sorted.push_back(&u);
  std::stable_sort(sorted.begin(), sorted.end(), [](auto a, auto b) { return a->id < b->id; });
  for (const auto* u : sorted) {
    Source s{u->name};
    const auto ui = std::find(r.unit_ids.begin(), r.unit_ids.end(), u->id);
    const auto ri = std::find(r.res_ids.begin(), r.res_ids.end(), u->id);
    if (ui != r.unit_ids.end()) s.unit = static_cast<int>(ui - r.unit_ids.begin());
    else if (ri != r.res_ids.end()) s.res = static_cast<int>(ri - r.res_ids.begin());
    else continue;
    (net.bus(u->bus).subgrid == Subgrid::kDc ? dc : ac).push_back(s);
  }
  std::vector<report::Column> cols{{"hour"}};
  for (const auto& s : dc) cols.push_back({s.name, 2});
  cols.push_back({kConverterColumn, 2});
  for (const auto& s : ac) cols.push_back({s.name, 2});
  for (const char* c : {"load_shedding", "observed_imbalance", "true_demand", "loss"}) cols.push_back({c, 2});
  cols.push_back({"shutdowns"});
  auto t = em.table("attack", cols);
  t.meta = {{"attack", attack::to_json(spec).dump()}, {"restart_delay_hours", std::to_string(ap.restart_delay_hours)}};
  auto value = [](const Source& s, const attack::HourImpact& h) {
    return s.unit >= 0 ? h.u[static_cast<std::size_t>(s.unit)] * h.p_g[static_cast<std::size_t>(s.unit)]
                       : h.res_kw[static_cast<std::size_t>(s.res)];
  };
  std::vector<double> totals(cols.size(), 0.0);
  for (const auto& h : r.hours) {
    std::vector<report::Cell> row{static_cast<long long>(h.hour)};
    for (const auto& s : dc) row.emplace_back(value(s, h));
    row.emplace_back(h.p_conv);
    for (const auto& s : ac) row.emplace_back(value(s, h));
    row.emplace_back(h.load_shed_kw);
    row.emplace_back(h.observed_imbalance_kw);
    row.emplace_back(h.true_demand_kw);
    row.emplace_back(h.loss_kw);
    std::string shut;
    for (int id : h.shutdowns) shut += (shut.empty() ? "" : ";") + net.units()[net.unit_index(id)].name;
    row.emplace_back(shut);
    for (std::size_t c = 1; c + 1 < row.size(); ++c) totals[c] += std::get<double>(row[c]);
    t.add(std::move(row));
  }
  std::vector<report::Cell> total_row{std::string("total")};
  for (std::size_t c = 1; c + 1 < cols.size(); ++c) total_row.emplace_back(totals[c]);
  total_row.emplace_back(std::string());
  t.add(std::move(total_row));

  auto s = em.table("attack-summary", {{"shed_kwh", 3},
                                       {"ens_cost", 2},
                                       {"operation_cost", 2},
                                       {"total_cost", 2},
                                       {"observed_excess_kw", 2},
                                       {"first_hour_reduction_kw", 2}});
  double excess = 0.0, reduction = 0.0;
  for (const auto& h : r.hours)
    if (spec.active(h.hour - 1)) {
      excess = h.observed_imbalance_kw;
      for (double d : h.redispatch_kw) reduction -= d;
      break;
    }
  s.add({r.shed_kwh, r.ens_cost, r.operation_cost, r.total_cost, excess, reduction});
  em.write("attack", t);
  em.write("attack_summary", s);
  return 0;
}

// ---------------------------------------------------------------------------

forecast::LoadSeries load_series(const Options& o, std::uint64_t seed, const json& p) {
  if (!o.load.empty()) {
    need_file(o.load);
    return forecast::read_load_csv(o.load);
  }
  forecast::SyntheticLoadConfig c;
  c.seed = seed;
  c.days = param(p, "days", c.days);
  c.base_kw = param(p, "base_kw", c.base_kw);
  c.noise_sd = param(p, "noise_sd", c.noise_sd);
  return forecast::synthetic_load(c);
}

forecast::Readout readout_of(const std::string& s) {
  if (s == "final_step") return forecast::Readout::kFinalStep;
  if (s == "window_ends") return forecast::Readout::kWindowEnds;
  throw ValidationError("readout must be 'final_step' or 'window_ends'");
}

int run_train(const Options& o) {
  const auto p = load_params(o, {"hidden", "depth", "epochs", "batch_size", "window", "dropout_rate", "learning_rate",
                                 "train_fraction", "readout", "day_of_week", "baselines", "days", "base_kw",
                                 "noise_sd"});
  const auto seed = resolve_seed(o);
  forecast::TrainingConfig cfg;
  cfg.seed = seed;
  cfg.hidden = param(p, "hidden", cfg.hidden);
  cfg.depth = param(p, "depth", cfg.depth);
  cfg.epochs = param(p, "epochs", cfg.epochs);
  cfg.batch_size = param(p, "batch_size", cfg.batch_size);
  cfg.window = param(p, "window", cfg.window);
  cfg.dropout_rate = param(p, "dropout_rate", cfg.dropout_rate);
  cfg.adam.learning_rate = param(p, "learning_rate", cfg.adam.learning_rate);
  cfg.train_fraction = param(p, "train_fraction", cfg.train_fraction);
  cfg.readout = readout_of(param<std::string>(p, "readout", "final_step"));
  cfg.day_of_week = param(p, "day_of_week", cfg.day_of_week);
  try {
    cfg.validate();
  } catch (const ContractViolation& e) {
    throw ValidationError(e.what());
  }
  const auto baselines = param<std::vector<std::string>>(p, "baselines", {});
  for (const auto& b : baselines)
    if (b != "lstm" && b != "ann") throw ValidationError("baselines: unknown model '" + b + "'");
  const auto series = load_series(o, seed, p);
  const json config{{"subcommand", "train"}, {"seed", seed}, {"load", file_digest(o.load)}, {"params", p}};
  Emitter em(o, seed, hash_config(config));

  auto metrics = em.table("train-metrics", {{"model"},
                                            {"mape_pct", 4},
                                            {"mae_kw", 3},
                                            {"rmse_kw", 3},
                                            {"mse_kw2", 3},
                                            {"final_train_loss", 8},
                                            {"test_windows"}});
  auto loss = em.table("train-loss", {{"epoch"}, {"model"}, {"loss", 8}});
  auto add = [&](const std::string& name, const forecast::Metrics& m, const std::vector<double>& hist,
                 std::size_t n) {
    metrics.add({name, m.mape, m.mae, m.rmse, m.rmse * m.rmse, hist.empty() ? 0.0 : hist.back(),
                 static_cast<long long>(n)});
    for (std::size_t e = 0; e < hist.size(); ++e) loss.add({static_cast<long long>(e + 1), name, hist[e]});
  };

  const auto r = forecast::train(series, cfg);
  add("BLSTM", forecast::evaluate(r.model, r.dataset, r.split.test), r.loss_history, r.split.test.size());
  for (const auto& b : baselines) {
    if (b == "lstm") {
      auto c = cfg;
      c.bidirectional = false;
      const auto u = forecast::train(series, c);
      add("LSTM", forecast::evaluate(u.model, u.dataset, u.split.test), u.loss_history, u.split.test.size());
    } else {
      const auto a = forecast::train_mlp(series, cfg);
      add("ANN", forecast::evaluate(a.model, a.dataset, a.split.test), a.loss_history, a.split.test.size());
    }
  }
  const auto ckpt = (em.dir() / "model.json").string();
  try {
    forecast::save_checkpoint(r.model, ckpt);
  } catch (const ParseError& e) {
    throw RuntimeFailure(e.what());
  }
  std::cout << "wrote " << ckpt << "\n";
  em.write("metrics", metrics);
  em.write("loss", loss);
  return 0;
}

// ---------------------------------------------------------------------------

DetectorParams detector_params(const json& p) {
  DetectorParams d;
  d.le = param(p, "le", d.le);
  d.ue = param(p, "ue", d.ue);
  d.p0 = param(p, "p0", d.p0);
  d.p1 = param(p, "p1", d.p1);
  d.alpha = param(p, "alpha", d.alpha);
  d.beta = param(p, "beta", d.beta);
  d.validate();
  return d;
}

const char* sample_name(Sample s) {
  switch (s) {
    case Sample::kZero: return "0";
    case Sample::kOne: return "1";
    case Sample::kDirectAttack: return "direct";
  }
  return "?";
}

int run_detect(const Options& o) {
  const auto p = load_params(o, {"le", "ue", "p0", "p1", "alpha", "beta", "from", "gate_history", "meter_id",
                                 "tamper", "days", "base_kw", "noise_sd"});
  const auto seed = resolve_seed(o);
  const auto dp = detector_params(p);
  json config{{"subcommand", "detect"}, {"seed", seed}, {"params", p}};

  if (o.model.empty()) {
    // Measured/forecast pairs: `hour,meter_id,measured_kw,forecast_kw`.
    std::vector<std::tuple<long long, std::string, double, double>> pairs;
    if (o.pairs.empty()) {
      for (const auto& r : bundled::kDetectionFixture) pairs.emplace_back(r.hour, "meter", r.measured_kw, r.forecast_kw);
    } else {
      const auto t = csv::read_string(need_file(o.pairs));
      const int ch = t.column("hour"), cm = t.column("meter_id"), cx = t.column("measured_kw"),
                cf = t.column("forecast_kw");
      if (ch < 0 || cm < 0 || cx < 0 || cf < 0)
        throw ParseError(o.pairs + ": need columns hour,meter_id,measured_kw,forecast_kw");
      for (std::size_t r = 0; r < t.rows.size(); ++r) {
        long long h = 0;
        if (!csv::parse_int(t.rows[r][static_cast<std::size_t>(ch)], h))
          throw ParseError(o.pairs + " line " + std::to_string(t.line_numbers[r]) + ": bad hour");
        pairs.emplace_back(h, t.rows[r][static_cast<std::size_t>(cm)], csv::field_double(t, r, cx, "measured_kw"),
                           csv::field_double(t, r, cf, "forecast_kw"));
      }
    }
    config["pairs"] = file_digest(o.pairs);
    Emitter em(o, seed, hash_config(config));
    auto log = em.table("detect", {{"hour"},
                                   {"meter_id"},
                                   {"measured_kw", 2},
                                   {"forecast_kw", 2},
                                   {"sample"},
                                   {"cum_log_ratio", 4},
                                   {"decision"}});
    DetectorRegistry reg;
    for (const auto& [h, id, x, f] : pairs) {
      const auto obs = process_measurement(id, x, f, reg, dp);
      log.add({h, id, x, f, std::string(sample_name(obs.sample)), obs.log_ratio, std::string(to_string(obs.decision))});
    }
    em.write("detect", log);
    return 0;
  }

  need_file(o.model);
  const auto model = forecast::load_checkpoint(o.model);
  const auto series = load_series(o, seed, p);
  const auto meter = param<std::string>(p, "meter_id", o.load.empty() ? "synthetic" : fs::path(o.load).stem().string());
  attack::MeterStream stream{meter, series, std::vector<char>(series.size(), 0)};
  if (p.contains("tamper")) {
    const auto& tp = p.at("tamper");
    const auto dir = param<std::string>(tp, "direction", "inflate");
    if (dir != "inflate" && dir != "reduce") throw ValidationError("tamper.direction must be 'inflate' or 'reduce'");
    stream = attack::tamper_stream(meter, series, param<std::size_t>(tp, "start", 0), param<std::size_t>(tp, "hours", 0),
                                   param(tp, "severity", 0.0),
                                   dir == "inflate" ? attack::Direction::kInflate : attack::Direction::kReduce);
  }
  attack::ReplayOptions ro;
  ro.from = param<std::size_t>(p, "from", 0);
  ro.gate_history = param(p, "gate_history", true);
  config["model"] = file_digest(o.model);
  config["load"] = file_digest(o.load);
  Emitter em(o, seed, hash_config(config));
  const std::vector<attack::MeterStream> streams{stream};
  const auto rows = attack::detection_pipeline_replay(streams, model, dp, ro);
  auto log = em.table("detect-replay", {{"hour"},
                                        {"meter_id"},
                                        {"timestamp"},
                                        {"measured_kw", 2},
                                        {"forecast_kw", 2},
                                        {"ratio", 6},
                                        {"sample"},
                                        {"cum_log_ratio", 4},
                                        {"decision"},
                                        {"tampered"}});
  for (const auto& r : rows)
    log.add({static_cast<long long>(r.hour), r.meter_id, static_cast<long long>(r.timestamp), r.measured, r.forecast,
             r.ratio, std::string(sample_name(r.sample)), r.log_ratio, std::string(to_string(r.decision)),
             static_cast<long long>(r.tampered)});
  em.write("detect", log);
  return 0;
}

// ---------------------------------------------------------------------------

int run_calibrate(const Options& o) {
  const auto p = load_params(o, {"from", "to", "coverage", "p1", "alpha", "beta", "days", "base_kw", "noise_sd"});
  const auto seed = resolve_seed(o);
  const double coverage = param(p, "coverage", 0.99);
  std::vector<double> ratios;
  json config{{"subcommand", "calibrate"}, {"seed", seed}, {"params", p}};
  if (!o.ratios.empty()) {
    const auto t = csv::read_string(need_file(o.ratios));
    const int c = t.column("ratio");
    if (c < 0) throw ParseError(o.ratios + ": need a 'ratio' column");
    for (std::size_t r = 0; r < t.rows.size(); ++r) ratios.push_back(csv::field_double(t, r, c, "ratio"));
    config["ratios"] = file_digest(o.ratios);
  } else {
    if (o.model.empty()) throw ValidationError("calibrate needs --ratios or --model");
    need_file(o.model);
    const auto model = forecast::load_checkpoint(o.model);
    const auto series = load_series(o, seed, p);
    ratios = attack::residual_ratios(model, series, param<std::size_t>(p, "from", 0),
                                     param<std::size_t>(p, "to", series.size()));
    config["model"] = file_digest(o.model);
    config["load"] = file_digest(o.load);
  }
  Emitter em(o, seed, hash_config(config));
  const auto c = calibrate(ratios, coverage);
  auto t = em.table("calibrate", {{"le", 6}, {"ue", 6}, {"p0", 6}, {"samples"}, {"in_band"}, {"coverage", 4}});
  t.add({c.le, c.ue, c.p0, static_cast<long long>(c.samples), static_cast<long long>(c.in_band), coverage});
  em.write("calibration", t);

  // Ready to pass back as `detect --params`.
  DetectorParams d;
  d.le = c.le;
  d.ue = c.ue;
  d.p0 = c.p0;
  d.p1 = param(p, "p1", d.p1);
  d.alpha = param(p, "alpha", d.alpha);
  d.beta = param(p, "beta", d.beta);
  d.validate();
  const auto path = (em.dir() / "detector_params.json").string();
  std::ofstream out(path);
  out << nlohmann::ordered_json{{"le", c.le}, {"ue", c.ue}, {"p0", c.p0}, {"p1", d.p1}, {"alpha", d.alpha},
                                {"beta", d.beta}}.dump(2)
      << "\n";
  if (!out) throw RuntimeFailure("cannot write " + path);
  std::cout << "wrote " << path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

lora::Key128 key_of(const json& p, const char* name, const lora::Key128& fallback) {
  if (!p.contains(name)) return fallback;
  const auto b = lora::from_hex(param<std::string>(p, name, ""));
  if (b.size() != 16) throw ValidationError(std::string(name) + " must be 16 bytes of hex");
  lora::Key128 k;
  std::copy(b.begin(), b.end(), k.begin());
  return k;
}

template <class T>
void field(std::ostream& os, const std::string& name, const T& value) {
  os << std::left << std::setw(26) << name << value << "\n";
}

void print_reading(std::ostream& os, const lora::MeterReading& r) {
  field(os, "reading.timestamp", r.timestamp);
  field(os, "reading.meter_id", r.meter_id);
  field(os, "reading.frequency_hz", r.frequency_hz());
  field(os, "reading.status", "0x" + lora::to_hex(std::span<const std::uint8_t>(&r.status, 1)));
  field(os, "point.voltage_mv", r.point.voltage_mv);
  field(os, "point.current_ma", r.point.current_ma);
  field(os, "point.active_power_w", r.point.active_power_w);
  field(os, "point.reactive_power_var", r.point.reactive_power_var);
  field(os, "point.power_factor", r.power_factor());
  for (std::size_t c = 0; c < 4; ++c) {
    const std::string n = lora::kComponentNames[c];
    if (!r.components[c]) {
      field(os, n, "absent");
      continue;
    }
    const auto& b = *r.components[c];
    field(os, n + ".active_power_w", b.active_power_w);
    field(os, n + ".reactive_power_var", b.reactive_power_var);
    field(os, n + ".voltage_mv", b.voltage_mv);
    field(os, n + ".current_ma", b.current_ma);
  }
  field(os, "converter_w", r.converter_w);
  for (const auto& f : lora::invalid_fields(r)) field(os, "invalid", f);
}

int inspect_mac(std::ostream& os, std::span<const std::uint8_t> bytes, const lora::SessionKeys& keys) {
  if (!bytes.empty()) {
    const auto h = lora::Mhdr::unpack(bytes[0]);
    field(os, "mhdr.mtype", lora::to_string(h.mtype));
    field(os, "mhdr.major", int(h.major));
  }
  const auto r = lora::open_bytes(bytes, keys);
  field(os, "mac.status", lora::to_string(r.status));
  if (!r.detail.empty()) field(os, "mac.detail", r.detail);
  if (!r.accepted()) return 1;
  const auto& f = *r.frame;
  char addr[16];
  std::snprintf(addr, sizeof addr, "%08X", f.fhdr.dev_addr);
  field(os, "fhdr.dev_addr", addr);
  field(os, "fhdr.fcnt", f.fhdr.fcnt);
  field(os, "fhdr.fopts", lora::to_hex(f.fhdr.fopts, true));
  if (f.fport) field(os, "fport", std::to_string(*f.fport) + " (" + lora::to_string(*r.port_class) + ")");
  field(os, "frm_payload.length", f.frm_payload.size());
  if (f.frm_payload.size() == lora::kReadingSize) print_reading(os, lora::decode_reading(f.frm_payload));
  else if (!f.frm_payload.empty()) field(os, "frm_payload", lora::to_hex(f.frm_payload, true));
  return 0;
}

int run_codec_inspect(const Options& o) {
  const auto p = load_params(o, {"nwk_s_key", "app_s_key"});
  const auto bytes = lora::from_hex(need_file(o.input));
  // Demonstration session keys used by the bundled vectors.
  lora::SessionKeys keys;
  keys.nwk_s_key = key_of(p, "nwk_s_key", {0x2b, 0x7e, 0x15, 0x16, 0x28, 0xae, 0xd2, 0xa6, 0xab, 0xf7, 0x15, 0x88,
                                           0x09, 0xcf, 0x4f, 0x3c});
  lora::Key128 app{};
  for (std::uint8_t i = 0; i < 16; ++i) app[i] = i;
  keys.app_s_key = key_of(p, "app_s_key", app);

  auto& os = std::cout;
  field(os, "length", bytes.size());
  std::string kind = o.frame;
  if (kind == "auto") {
    if (bytes.size() == lora::kReadingSize) {
      kind = "reading";
    } else {
      kind = "mac";
      try {
        lora::parse_explicit(bytes);
        kind = "phy";
      } catch (const lora::CodecError&) {
      }
    }
  }
  field(os, "frame", kind);
  if (kind == "reading") {
    print_reading(os, lora::decode_reading(bytes));
    return 0;
  }
  if (kind == "phy") {
    const auto f = lora::parse_explicit(bytes);
    field(os, "phdr.payload_length", int(f.phdr.payload_length));
    field(os, "phdr.coding_rate", "4/" + std::to_string(4 + f.phdr.coding_rate));
    field(os, "phdr.crc_present", int(f.phdr.crc_present));
    return inspect_mac(os, f.payload, keys);
  }
  if (kind == "mac") return inspect_mac(os, bytes, keys);
  const auto id = lora::fragment_id(bytes);
  field(os, "fragment.sequence", id.sequence);
  field(os, "fragment.index", int(id.index));
  field(os, "fragment.total", int(id.total));
  field(os, "fragment.data_bytes", bytes.size() - lora::kFragmentHeader);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybrid microgrid scheduling, attack and detection toolkit", "hmgsim"};
  app.require_subcommand(1, 1);
  app.failure_message(CLI::FailureMessage::help);
  Options o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--network", o.network, "network JSON (default: bundled 33-bus hybrid microgrid)");
    sub->add_option("--scenario", o.scenario, "hourly scenario CSV (default: bundled 24-hour day)");
    sub->add_option("--params", o.params, "parameter JSON");
    sub->add_option("--seed", o.seed, "random seed (env HMG_SEED when absent; default 1)");
    sub->add_option("--out", o.out, "output directory")->capture_default_str();
    sub->add_option("--format", o.format, "report format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  };
  auto* schedule = app.add_subcommand("schedule", "day-ahead commitment and dispatch");
  common(schedule);
  auto* attack = app.add_subcommand("attack", "false-data injection impact");
  common(attack);
  attack->add_option("--attack-spec", o.attack_spec, "attack JSON (default: reference 12:00 attack)");
  attack->add_option("--schedule", o.schedule, "wide schedule CSV (default: reference dispatch)");
  attack->add_option("--commitment", o.commitment, "commitment CSV matching --schedule");
  auto* train = app.add_subcommand("train", "train the load forecaster");
  common(train);
  train->add_option("--load", o.load, "hourly load CSV (default: synthetic series for the seed)");
  auto* detect = app.add_subcommand("detect", "sequential attack detection");
  common(detect);
  detect->add_option("--model", o.model, "forecaster checkpoint; without it, replay measured/forecast pairs");
  detect->add_option("--load", o.load, "hourly load CSV replayed through the model");
  detect->add_option("--pairs", o.pairs, "measured/forecast pairs CSV (default: bundled fixture)");
  auto* calib = app.add_subcommand("calibrate", "LE/UE/P0 from clean residuals");
  common(calib);
  calib->add_option("--model", o.model, "forecaster checkpoint");
  calib->add_option("--load", o.load, "clean hourly load CSV");
  calib->add_option("--ratios", o.ratios, "CSV with a 'ratio' column, instead of --model");
  auto* inspect = app.add_subcommand("codec-inspect", "decode a hex frame dump");
  inspect->add_option("file", o.input, "hex dump ('#' comments allowed)")->required();
  inspect->add_option("--frame", o.frame, "frame layer")
      ->check(CLI::IsMember({"auto", "reading", "mac", "phy", "fragment"}))
      ->capture_default_str();
  inspect->add_option("--params", o.params, "JSON with nwk_s_key / app_s_key hex");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  try {
    if (*schedule) return run_schedule(o);
    if (*attack) return run_attack(o);
    if (*train) return run_train(o);
    if (*detect) return run_detect(o);
    if (*calib) return run_calibrate(o);
    if (*inspect) return run_codec_inspect(o);
  } catch (const RuntimeFailure& e) {
    std::cerr << "hmgsim: " << e.what() << "\n";
    return 2;
  } catch (const forecast::NumericError& e) {
    std::cerr << "hmgsim: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "hmgsim: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
