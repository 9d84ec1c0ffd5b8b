#pragma once

// Tabular run reports written as CSV or JSON. Numbers are rendered once at a
// fixed per-column precision, so both formats carry identical values and
// repeated runs are byte-identical.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "hmg/grid_model.hpp"
#include "hmg/lora/crypto.hpp"
#include "hmg/lora/hex.hpp"

namespace hmg::report {

inline std::string config_hash(const std::string& canonical) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(canonical.data());
  const auto d = lora::sha256(std::span<const std::uint8_t>(p, canonical.size()));
  return lora::to_hex(d);
}

struct Column {
  std::string name;
  int precision = -1;  // < 0: integer or text
};

using Cell = std::variant<long long, double, std::string>;

struct Table {
  std::string kind;  // e.g. "schedule", "attack"
  std::uint64_t seed = 0;
  std::string config_sha256;
  std::vector<std::pair<std::string, std::string>> meta;  // extra header lines, in order
  std::vector<Column> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) {
    if (row.size() != columns.size()) throw ContractViolation("report: row width differs from header");
    rows.push_back(std::move(row));
  }
};

inline std::string render(const Cell& c, int precision) {
  if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
  if (const auto* s = std::get_if<std::string>(&c)) return *s;
  const double v = std::get<double>(c);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision < 0 ? 6 : precision, v);
  std::string out = buf;
  if (out.find_first_not_of("-0.") == std::string::npos) out.erase(0, out[0] == '-');  // no "-0.000"
  return out;
}

inline std::string quote_csv(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return q + "\"";
}

/// Comment header (# key: value) followed by the CSV table.
inline void write_csv(std::ostream& out, const Table& t) {
  out << "# hmgsim " << t.kind << "\n# seed: " << t.seed << "\n# config_sha256: " << t.config_sha256 << "\n";
  for (const auto& [k, v] : t.meta) out << "# " << k << ": " << v << "\n";
  for (std::size_t c = 0; c < t.columns.size(); ++c) out << (c ? "," : "") << t.columns[c].name;
  out << "\n";
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c)
      out << (c ? "," : "") << quote_csv(render(row[c], t.columns[c].precision));
    out << "\n";
  }
}

inline nlohmann::ordered_json to_json(const Table& t) {
  nlohmann::ordered_json j;
  j["kind"] = t.kind;
  j["seed"] = t.seed;
  j["config_sha256"] = t.config_sha256;
  auto meta = nlohmann::ordered_json::object();
  for (const auto& [k, v] : t.meta) meta[k] = v;
  j["meta"] = meta;
  auto cols = nlohmann::ordered_json::array();
  for (const auto& c : t.columns) cols.push_back(c.name);
  j["columns"] = cols;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& row : t.rows) {
    auto r = nlohmann::ordered_json::array();
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (std::holds_alternative<double>(row[c]))
        r.push_back(std::stod(render(row[c], t.columns[c].precision)));
      else if (const auto* i = std::get_if<long long>(&row[c]))
        r.push_back(*i);
      else
        r.push_back(std::get<std::string>(row[c]));
    }
    rows.push_back(r);
  }
  j["rows"] = rows;
  return j;
}

inline void write_json(std::ostream& out, const Table& t) { out << to_json(t).dump(2) << "\n"; }

inline void write_file(const std::string& path, const Table& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  const bool json = path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
  json ? write_json(out, t) : write_csv(out, t);
  if (!out) throw std::runtime_error("error writing " + path);
}

}  // namespace hmg::report
