#pragma once

// JSON checkpoint: architecture, scaler, and every tensor with its shape
// (row-major data).

#include <fstream>
#include <random>
#include <string>

#include <json.hpp>

#include "hmg/forecast/lstm.hpp"

namespace hmg::forecast {

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json to_json(const BlstmModel& m) {
  m.check();
  nlohmann::json j;
  j["format"] = "hmg-forecaster";
  j["version"] = kCheckpointVersion;
  j["architecture"] = {{"input_size", m.input_size()}, {"hidden", m.hidden_size()},
                       {"depth", m.layers.size()},     {"bidirectional", m.bidirectional},
                       {"window", m.input_window},     {"day_of_week", m.day_of_week},
                       {"readout", m.readout == Readout::kFinalStep ? "final_step" : "window_ends"}};
  j["scaler"] = {{"min", m.scaler.min}, {"max", m.scaler.max}};
  auto& tensors = j["tensors"];
  tensors = nlohmann::json::object();
  m.visit([&](const std::string& name, const auto& t) {
    std::vector<double> data;
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) data.push_back(t(r, c));
    tensors[name] = {{"shape", {t.rows(), t.cols()}}, {"data", data}};
  });
  return j;
}

inline BlstmModel from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "hmg-forecaster") throw ParseError("checkpoint: unknown format");
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw ParseError("checkpoint: unsupported version " + j.at("version").dump());
    const auto& a = j.at("architecture");
    ModelShape s;
    s.input_size = a.at("input_size").get<int>();
    s.hidden = a.at("hidden").get<int>();
    s.depth = a.at("depth").get<int>();
    s.bidirectional = a.at("bidirectional").get<bool>();
    s.window = a.at("window").get<int>();
    const auto readout = a.value("readout", std::string("final_step"));
    if (readout != "final_step" && readout != "window_ends") throw ParseError("checkpoint: unknown readout " + readout);
    s.readout = readout == "final_step" ? Readout::kFinalStep : Readout::kWindowEnds;
    std::mt19937_64 rng(0);
    BlstmModel m = make_model(s, rng);
    m.day_of_week = a.at("day_of_week").get<bool>();
    m.scaler = {j.at("scaler").at("min").get<double>(), j.at("scaler").at("max").get<double>()};
    const auto& tensors = j.at("tensors");
    std::size_t seen = 0;
    m.visit([&](const std::string& name, auto& t) {
      if (!tensors.contains(name)) throw ParseError("checkpoint: missing tensor " + name);
      const auto& e = tensors.at(name);
      const auto shape = e.at("shape").get<std::vector<long>>();
      const auto data = e.at("data").get<std::vector<double>>();
      if (shape.size() != 2 || shape[0] != t.rows() || shape[1] != t.cols() ||
          data.size() != static_cast<std::size_t>(t.size()))
        throw ParseError("checkpoint: tensor " + name + " has the wrong shape");
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < t.rows(); ++r)
        for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = data[k++];
      if (!t.allFinite()) throw ParseError("checkpoint: tensor " + name + " is not finite");
      ++seen;
    });
    if (seen != tensors.size()) throw ParseError("checkpoint: unexpected extra tensors");
    m.check();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  } catch (const ContractViolation& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const BlstmModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out << to_json(m).dump(1) << '\n';
}

inline BlstmModel load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  return from_json(j);
}

}  // namespace hmg::forecast
