// Acceptance run: one PASS/FAIL line per criterion.
//
//   hmg_acceptance            all criteria
//   hmg_acceptance 3 7        selected criteria
//   hmg_acceptance --expect-fail 4
//                             exits 0 only if criterion 4 evaluates to FAIL
//
// Exit status: 0 when every selected criterion passes (or, with
// --expect-fail, fails), 1 otherwise.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fd_oracle.hpp"
#include "hmg/attack.hpp"
#include "hmg/bundled.hpp"
#include "hmg/detector.hpp"
#include "hmg/forecast/train.hpp"
#include "hmg/grid_io.hpp"
#include "hmg/lora/fragment.hpp"
#include "hmg/lora/hex.hpp"
#include "hmg/lora/mac.hpp"
#include "hmg/powerflow.hpp"
#include "hmg/replay.hpp"
#include "hmg/scheduler.hpp"
#include "newton_oracle.hpp"
#include "toy_grid.hpp"
#include "uc_oracle.hpp"

using namespace hmg;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    detail << (detail.tellp() > 0 ? "; " : "") << (ok ? "" : "FAILED ") << what;
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

DetectorParams wald_params() { return {0.08, 24.59, 0.0094, 0.99, 0.001, 0.002}; }

// ---------------------------------------------------------------------------

void sprt_trace(Verdict& v) {
  const auto p = wald_params();
  const Decision expect[] = {Decision::kContinue, Decision::kNoAttack, Decision::kContinue,
                             Decision::kNoAttack, Decision::kContinue, Decision::kAttack};
  DetectorRegistry reg;
  bool sequence = true;
  double no_attack = 0.0, attack = 0.0;
  for (std::size_t i = 0; i < bundled::kDetectionFixture.size(); ++i) {
    const auto& r = bundled::kDetectionFixture[i];
    const auto obs = process_measurement("meter", r.measured_kw, r.forecast_kw, reg, p);
    sequence = sequence && obs.decision == expect[i];
    if (obs.decision == Decision::kNoAttack) no_attack = obs.log_ratio;
    if (obs.decision == Decision::kAttack) attack = obs.log_ratio;
  }
  v.check(std::abs(no_attack + 9.19) <= 0.01, "NoAttack at " + fmt("%.4f", no_attack));
  v.check(std::abs(attack - 9.31) <= 0.01, "Attack at " + fmt("%.4f", attack));
  v.check(sequence, "six-row decision sequence");
}

// Runs the detector's walk on Bernoulli(q) samples until it stops.
void sprt_monte_carlo(const DetectorParams& p, double q, int trials, std::uint64_t seed, double& mean_n,
                      double& attack_rate) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution x(q);
  long total = 0, attacks = 0;
  for (int i = 0; i < trials; ++i) {
    SprtState s{"mc", 0.0, 0, 0};
    for (;;) {
      const auto r = sprt_step(s, x(rng) ? 1 : 0, p);
      if (is_terminal(r.decision)) {
        total += s.n + 1;
        attacks += r.decision == Decision::kAttack;
        break;
      }
      s = r.state;
    }
  }
  mean_n = static_cast<double>(total) / trials;
  attack_rate = static_cast<double>(attacks) / trials;
}

void expected_samples_claim(Verdict& v) {
  const auto p = wald_params();
  const double e0 = expected_samples(p, Hypothesis::kH0), e1 = expected_samples(p, Hypothesis::kH1);
  v.check(std::abs(e0 - 1.375) <= 0.01, "E[N|H0] = " + fmt("%.4f", e0));
  v.check(std::abs(e1 - 1.507) <= 0.01, "E[N|H1] = " + fmt("%.4f", e1));
  double n0, fa, n1, hit;
  sprt_monte_carlo(p, p.p0, 100000, 1, n0, fa);
  sprt_monte_carlo(p, p.p1, 100000, 2, n1, hit);
  v.check(std::abs(n0 - e0) <= 0.1 * e0, "MC N|H0 = " + fmt("%.4f", n0));
  v.check(std::abs(n1 - e1) <= 0.1 * e1, "MC N|H1 = " + fmt("%.4f", n1));
  v.check(fa <= 2 * p.alpha, "false alarm " + fmt("%.5f", fa));
  v.check(1.0 - hit <= 2 * p.beta, "miss " + fmt("%.5f", 1.0 - hit));
}

void gradient_correctness(Verdict& v) {
  std::mt19937_64 rng(2024);
  const auto m = forecast::make_model(forecast::ModelShape{8, 8, 2, true, 14}, rng);
  const auto batch = oracle::random_batch(8, 14, 4, rng);
  const auto r = oracle::check_gradients(m, batch, 1e-5);
  v.check(r.entries == m.parameter_count(), std::to_string(r.entries) + " parameters checked");
  v.check(r.under_floor < r.entries, std::to_string(r.entries - r.under_floor) + " resolvable above 1e-6");
  v.check(r.max_relative_error < 1e-4, "max relative error " + fmt("%.2e", r.max_relative_error) + " at " +
                                           r.worst_parameter);
}

void forecast_property(Verdict& v) {
  int better = 0;
  double worst_mape = 0.0;
  std::ostringstream per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    forecast::SyntheticLoadConfig sc;
    sc.seed = seed;
    const auto series = forecast::synthetic_load(sc);
    forecast::TrainingConfig cfg;
    cfg.seed = seed;
    const auto b = forecast::train(series, cfg);
    const auto mb = forecast::evaluate(b.model, b.dataset, b.split.test);
    cfg.bidirectional = false;
    const auto u = forecast::train(series, cfg);
    const auto mu = forecast::evaluate(u.model, u.dataset, u.split.test);
    worst_mape = std::max(worst_mape, mb.mape);
    better += mb.rmse < mu.rmse;
    per_seed << (seed > 1 ? " " : "") << "s" << seed << ":" << fmt("%.3f", mb.mape) << "%/"
             << fmt("%.0f", mb.rmse * mb.rmse) << "v" << fmt("%.0f", mu.rmse * mu.rmse);
  }
  v.check(worst_mape <= 5.0, "worst BLSTM test MAPE " + fmt("%.3f", worst_mape) + "%");
  v.check(better >= 3, "BLSTM MSE below LSTM on " + std::to_string(better) + "/5 seeds [" + per_seed.str() + "]");
}

void power_flow(Verdict& v) {
  const auto net = bundled::ieee33_feeder();
  std::vector<Injection> inj(net.buses().size());
  std::vector<std::complex<double>> s;
  for (std::size_t b = 0; b < inj.size(); ++b) {
    if (net.buses()[b].subgrid == Subgrid::kAc)
      inj[b] = {-net.buses()[b].peak_active_load, -net.buses()[b].peak_reactive_load};
    s.emplace_back(inj[b].p_kw, inj[b].q_kvar);
  }
  const auto res = solve_radial(net, inj);
  const auto ref = oracle::newton_power_flow(net, s);
  v.check(res.converged && ref.converged, "both solvers converge");
  double dv = 0.0;
  for (std::size_t b = 0; b < net.buses().size(); ++b)
    if (net.buses()[b].subgrid == Subgrid::kAc) dv = std::max(dv, std::abs(std::polar(res.v_mag[b], res.v_ang[b]) - ref.v[b]));
  v.check(dv <= 1e-6, "max |V - V_oracle| " + fmt("%.2e", dv) + " pu");
  const double rel = std::abs(res.total_loss - ref.loss_kw) / ref.loss_kw;
  v.check(rel <= 1e-3, "loss " + fmt("%.3f", res.total_loss) + " kW vs " + fmt("%.3f", ref.loss_kw) + " kW");
  double worst = 0.0;
  for (const auto& m : injection_residual(net, res)) worst = std::max(worst, m.max());
  v.check(worst <= res.tolerance, "max injection residual " + fmt("%.2e", worst) + " pu");
}

void scheduler_optimality(Verdict& v) {
  const auto units = oracle::two_unit_fleet();
  const auto f = oracle::daily_factors();
  std::vector<double> loads;
  for (double x : f) loads.push_back(100.0 * x);
  // The exact DP is first confirmed against exhaustive enumeration on 6-hour slices.
  bool dp_exact = true;
  for (std::size_t start : {0u, 6u, 12u, 18u}) {
    const std::vector<double> part(loads.begin() + start, loads.begin() + start + 6);
    dp_exact = dp_exact && std::abs(oracle::dp_optimum(part, units, 3) - oracle::enumerate_optimum(part, units, 3)) < 1e-9;
  }
  v.check(dp_exact, "DP oracle equals enumeration");
  const double opt = oracle::dp_optimum(loads, units, 3);
  const auto toy = oracle::single_bus_network(100.0, units);
  const auto toy_sc = oracle::factor_scenario(f);
  int within = 0;
  double worst_gap = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    OptimizerConfig cfg;
    cfg.seed = seed;
    const auto r = optimize(toy_sc, toy, cfg);
    const double gap = r.cost / opt - 1.0;
    worst_gap = std::max(worst_gap, gap);
    within += r.report.feasible() && gap <= 0.01;
  }
  v.check(within == 5, std::to_string(within) + "/5 seeds within 1% of " + fmt("%.2f", opt) + " (worst gap " +
                           fmt("%.3f", 100 * worst_gap) + "%)");
  const auto net = bundled::ieee33_hmg();
  const auto sc = bundled::daily_scenario();
  OptimizerConfig cfg;
  const auto r = optimize(sc, net, cfg);
  std::vector<PowerFlowResult> flows;
  const auto rep = evaluate_constraints(r.schedule, sc, net, cfg.evaluation, &flows);
  double dev = 0.0;
  for (const auto& pf : flows) dev = std::max(dev, pf.max_voltage_deviation(net));
  v.check(rep.feasible(), "33-bus day feasible (" + std::to_string(rep.items.size()) + " violations, cost " +
                              fmt("%.2f", r.cost) + ")");
  v.check(dev <= 0.1, "max voltage deviation " + fmt("%.4f", dev) + " pu");
}

void attack_impact(Verdict& v) {
  const auto net = bundled::ieee33_hmg();
  const auto sc = bundled::daily_scenario();
  const auto r = attack::run_attack_scenario(sc, net, bundled::reference_schedule(net), bundled::reference_attack());
  const auto& h12 = r.hours[11];
  double reduction = 0.0;
  for (double d : h12.redispatch_kw) reduction -= d;
  v.check(std::abs(h12.observed_imbalance_kw - 1470.0) < 1e-9, "observed excess " + fmt("%.6f", h12.observed_imbalance_kw));
  v.check(std::abs(reduction - 505.0) < 1e-9, "first-hour reduction " + fmt("%.6f", reduction));
  bool confined = true;
  std::string hours;
  for (const auto& h : r.hours) {
    const bool shed = h.load_shed_kw > 1e-6;
    if (shed) hours += (hours.empty() ? "" : ",") + std::to_string(h.hour);
    confined = confined && shed == (h.hour >= 12 && h.hour <= 17);
  }
  v.check(confined, "shedding in hours {" + hours + "}");
  v.check(std::abs(r.shed_kwh - 3631.0) <= 0.15 * 3631.0,
          "shed " + fmt("%.1f", r.shed_kwh) + " kWh (" + fmt("%+.1f", 100.0 * (r.shed_kwh / 3631.0 - 1.0)) + "%)");
}

void codec_soundness(Verdict& v) {
  using namespace hmg::lora;
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::uint32_t> u32;
  std::uniform_int_distribution<int> sf(9, 12);
  std::bernoulli_distribution present(0.7);
  int ok = 0;
  for (int i = 0; i < 10000; ++i) {
    MeterReading r;
    r.timestamp = u32(rng);
    r.meter_id = static_cast<std::uint16_t>(u32(rng));
    r.frequency_chz = static_cast<std::uint16_t>(u32(rng));
    r.status = static_cast<std::uint8_t>(u32(rng));
    r.reserved = static_cast<std::uint8_t>(u32(rng));
    r.point = {u32(rng), u32(rng), u32(rng), static_cast<std::int32_t>(u32(rng)),
               static_cast<std::uint16_t>(u32(rng) % 10001)};
    for (auto& c : r.components)
      if (present(rng)) c = ComponentBlock{u32(rng) % kAbsentPower, static_cast<std::int32_t>(u32(rng)), u32(rng), u32(rng)};
    r.converter_w = static_cast<std::int32_t>(u32(rng));
    const int s = sf(rng);
    auto packets = fragment(encode_reading(r), s, static_cast<std::uint16_t>(i & 0x3FF));
    std::shuffle(packets.begin(), packets.end(), rng);
    ok += decode_reading(reassemble(packets, s)) == r;
  }
  v.check(ok == 10000, std::to_string(ok) + "/10000 readings bit-exact through SF 9-12");

  SessionKeys keys;
  const auto nwk = from_hex("2b7e151628aed2a6abf7158809cf4f3c");
  std::copy(nwk.begin(), nwk.end(), keys.nwk_s_key.begin());
  for (int i = 0; i < 16; ++i) keys.app_s_key[i] = static_cast<std::uint8_t>(i);
  AppFrame app;
  app.fhdr.dev_addr = 0x26011BDA;
  app.fhdr.fcnt = 42;
  app.fport = 10;
  app.frm_payload = encode_reading(MeterReading{});
  const auto good = seal(app, keys, Direction::kUplink).serialize();
  int rejected = 0;
  for (std::size_t bit = 0; bit < good.size() * 8; ++bit) {
    auto bad = good;
    bad[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    rejected += open_bytes(bad, keys).status == OpenStatus::kMicMismatch;
  }
  v.check(open_bytes(good, keys).accepted() && rejected == static_cast<int>(good.size() * 8),
          std::to_string(rejected) + "/" + std::to_string(good.size() * 8) + " single-bit flips rejected by MIC");

#ifdef HMG_FUZZ_BIN
  long seconds = 3600;
  if (const char* e = std::getenv("HMG_FUZZ_SECONDS")) seconds = std::atol(e);
  const auto dir = fs::temp_directory_path() / "hmg_fuzz_corpus";
  fs::create_directories(dir);
  int n = 0;
  for (const auto& entry : fs::directory_iterator(std::string(HMG_DATA_DIR) + "/vectors")) {
    const auto bytes = from_hex(read_text_file(entry.path().string()));
    for (std::uint8_t sel = 0; sel < 4; ++sel) {
      std::ofstream out(dir / ("seed" + std::to_string(n++)), std::ios::binary);
      out.put(static_cast<char>(sel));
      out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
  }
  const auto log = fs::temp_directory_path() / "hmg_fuzz.log";
  const std::string cmd = std::string(HMG_FUZZ_BIN) + " -max_total_time=" + std::to_string(seconds) +
                          " -print_final_stats=1 " + dir.string() + " > " + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  std::string runs = "?";
  std::ifstream in(log);
  for (std::string line; std::getline(in, line);)
    if (line.rfind("stat::number_of_executed_units:", 0) == 0) runs = line.substr(line.rfind(':') + 1);
  v.check(rc == 0, std::to_string(seconds) + " s fuzz run, " + runs.substr(runs.find_first_not_of(' ')) +
                       " executions, exit " + std::to_string(rc));
#else
  v.check(false, "fuzz target not built (no clang with libFuzzer)");
#endif
}

void end_to_end(Verdict& v) {
  const auto series = forecast::synthetic_load({});
  const auto trained = forecast::train(series, forecast::TrainingConfig{});
  const auto cut = trained.split.cut_hour;
  const auto cal = calibrate(attack::residual_ratios(trained.model, series, 0, cut));
  DetectorParams p = wald_params();
  p.le = cal.le;
  p.ue = cal.ue;
  p.p0 = cal.p0;
  const double rho = 0.5 * (cal.le + cal.ue);
  const std::size_t onset = cut + 4 * 24 + 12;
  const std::vector<attack::MeterStream> streams{
      attack::tamper_stream("meter", series, onset, 5, rho, attack::Direction::kInflate)};
  attack::ReplayOptions opt;
  opt.from = cut;
  const auto rows = attack::detection_pipeline_replay(streams, trained.model, p, opt);
  long false_attacks = 0, flagged_at = -1;
  for (const auto& r : rows) {
    const bool attack = r.decision == Decision::kAttack || r.decision == Decision::kDirectAttack;
    if (r.hour < onset) false_attacks += attack;
    if (r.hour >= onset && attack && flagged_at < 0) flagged_at = static_cast<long>(r.hour - onset) + 1;
  }
  v.check(false_attacks == 0, std::to_string(false_attacks) + " false Attack decisions over " +
                                  std::to_string(onset - cut) + " clean hours");
  v.check(flagged_at >= 1 && flagged_at <= 2,
          "rho " + fmt("%.4f", rho) + " flagged at sample " + std::to_string(flagged_at) + " (LE " +
              fmt("%.4f", cal.le) + ", UE " + fmt("%.4f", cal.ue) + ", P0 " + fmt("%.4f", cal.p0) + ")");
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<void(Verdict&)> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> c{
      {1, "SPRT trace reproduction", 1.0, sprt_trace},
      {2, "expected-sample claim", 30.0, expected_samples_claim},
      {3, "gradient correctness", 60.0, gradient_correctness},
      {4, "forecast property", 600.0, forecast_property},
      {5, "power flow", 1.0, power_flow},
      {6, "scheduler optimality", 300.0, scheduler_optimality},
      {7, "attack impact", 10.0, attack_impact},
      {8, "codec soundness", 1e9, codec_soundness},
      {9, "end-to-end detection", 1e9, end_to_end},
  };
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> pick;
  bool expect_fail = false;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--expect-fail") {
      expect_fail = true;
      continue;
    }
    const int n = std::atoi(a.c_str());
    if (n < 1 || n > static_cast<int>(criteria().size())) {
      std::cerr << "usage: hmg_acceptance [--expect-fail] [criterion 1-9 ...]\n";
      return 2;
    }
    pick.push_back(n);
  }
  bool all = true;
  for (const auto& c : criteria()) {
    if (!pick.empty() && std::find(pick.begin(), pick.end(), c.id) == pick.end()) continue;
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(v);
    } catch (const std::exception& e) {
      v.check(false, std::string("exception: ") + e.what());
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s < 1e9) v.check(s < c.budget_s, "runtime " + fmt("%.2f", s) + " s < " + fmt("%g", c.budget_s) + " s");
    std::printf("%s  %d  %-24s %8.2f s  %s\n", v.pass ? "PASS" : "FAIL", c.id, c.name, s, v.detail.str().c_str());
    std::fflush(stdout);
    all = all && (expect_fail ? !v.pass : v.pass);
  }
  if (expect_fail) std::printf("(criterion evaluated with an expected FAIL verdict)\n");
  return all ? 0 : 1;
}
