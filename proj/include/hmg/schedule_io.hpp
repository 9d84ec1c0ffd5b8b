#pragma once

// Reading back the wide schedule tables written by `hmgsim schedule`:
// `hour,<unit name>...,AC-DC` in kW, and an optional commitment table of the
// same shape holding 0/1.

#include <string>
#include <vector>

#include "hmg/csv.hpp"
#include "hmg/grid_model.hpp"
#include "hmg/scheduler.hpp"

namespace hmg {

inline constexpr const char* kConverterColumn = "AC-DC";

inline std::vector<std::string> schedule_columns(const Network& net) {
  std::vector<std::string> cols{"hour"};
  for (auto k : net.dispatchable_units()) cols.push_back(net.units()[k].name);
  cols.push_back(kConverterColumn);
  return cols;
}

namespace detail {

inline std::vector<int> column_positions(const csv::Table& t, const std::vector<std::string>& names) {
  std::vector<int> pos;
  for (const auto& n : names) {
    const int c = t.column(n);
    if (c < 0) throw ParseError("schedule: missing column '" + n + "'");
    pos.push_back(c);
  }
  return pos;
}

}  // namespace detail

/// Without a commitment table every unit is taken as committed.
inline Schedule read_schedule_csv(const std::string& text, const Network& net,
                                  const std::string& commitment_text = {}) {
  const auto names = schedule_columns(net);
  const auto t = csv::read_string(text);
  const auto pos = detail::column_positions(t, names);
  auto s = Schedule::zeros(net, t.rows.size());
  const std::size_t n = s.units();
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    long long hour = 0;
    if (!csv::parse_int(t.rows[r][static_cast<std::size_t>(pos[0])], hour) || hour != static_cast<long long>(r + 1))
      throw ParseError("schedule row " + std::to_string(r + 1) + ": expected hour " + std::to_string(r + 1));
    for (std::size_t k = 0; k < n; ++k) {
      s.p_g[r][k] = csv::field_double(t, r, pos[k + 1], names[k + 1]);
      s.u[r][k] = 1;
    }
    s.p_conv[r] = csv::field_double(t, r, pos[n + 1], kConverterColumn);
  }
  if (!commitment_text.empty()) {
    const auto c = csv::read_string(commitment_text);
    if (c.rows.size() != t.rows.size()) throw ParseError("commitment: row count differs from schedule");
    auto cpos = names;
    cpos.pop_back();
    const auto cp = detail::column_positions(c, cpos);
    for (std::size_t r = 0; r < c.rows.size(); ++r)
      for (std::size_t k = 0; k < n; ++k) {
        long long u = 0;
        if (!csv::parse_int(c.rows[r][static_cast<std::size_t>(cp[k + 1])], u) || (u != 0 && u != 1))
          throw ParseError("commitment row " + std::to_string(r + 1) + ": " + names[k + 1] + " must be 0 or 1");
        s.u[r][k] = static_cast<int>(u);
      }
  }
  try {
    s.validate();
  } catch (const ContractViolation& e) {
    throw ValidationError(e.what());
  }
  return s;
}

}  // namespace hmg
