#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <system_error>

#include "trimcp/errors.hpp"
#include "trimcp/harness.hpp"

namespace trimcp {
namespace {

const std::string kNotAvailable = "N/A";

std::string fixed4(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return kNotAvailable;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

// Retention-type probabilities switch to scientific notation below 1e-3.
std::string probability(double v) {
  if (v > 0.0 && v < 1e-3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1e", v);
    return buf;
  }
  return fixed4(v);
}

std::string optional4(const std::optional<double>& v) { return v ? fixed4(*v) : kNotAvailable; }

nlohmann::ordered_json cell_to_json(const std::string& column, const std::string& cell) {
  if (column == "method" || column == "threshold_source") return cell;
  if (cell == kNotAvailable) return nullptr;
  if (cell == "inf" || cell == "-inf") return cell;
  return std::stod(cell);
}

}  // namespace

TableFormat parse_format(const std::string& s) {
  if (s == "csv") return TableFormat::csv;
  if (s == "json") return TableFormat::json;
  throw ConfigError("unknown format '" + s + "' (expected csv or json)");
}

const std::vector<std::string>& table_columns() {
  static const std::vector<std::string> cols = {
      "method",        "threshold_source", "coverage",  "coverage_lo",        "coverage_hi", "width",
      "p_c",           "p_d",              "eps_tilde", "delta_trim_plus",    "D_Q_plus",    "dirty_contribution",
      "L_mix_plus",    "cons_lb",          "audit_lb",  "fallback_rate"};
  return cols;
}

std::vector<std::string> table_row(const RunResult& r) {
  const DiagnosticReport& d = r.report;
  return {r.method,
          r.threshold_source,
          fixed4(r.coverage_summary.mean),
          fixed4(r.coverage_summary.lo),
          fixed4(r.coverage_summary.hi),
          fixed4(r.width_summary.mean),
          probability(d.p_c),
          probability(d.p_d),
          probability(d.eps_tilde),
          fixed4(d.delta_trim_plus),
          optional4(d.D_Q_plus),
          probability(d.dirty_contribution),
          fixed4(d.L_mix_plus),
          fixed4(r.cons_lb),
          optional4(r.audit_lb),
          fixed4(r.fallback_rate)};
}

void emit_tables(const std::vector<RunResult>& results, TableFormat format, std::ostream& out) {
  const auto& cols = table_columns();
  if (format == TableFormat::csv) {
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
    for (const auto& r : results) {
      const auto row = table_row(r);
      for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
      out << '\n';
    }
  } else {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : results) {
      const auto row = table_row(r);
      nlohmann::ordered_json obj = nlohmann::ordered_json::object();
      for (std::size_t i = 0; i < row.size(); ++i) obj[cols[i]] = cell_to_json(cols[i], row[i]);
      arr.push_back(obj);
    }
    nlohmann::ordered_json doc = {{"columns", cols}, {"rows", arr}};
    out << doc.dump(2) << '\n';
  }
  if (!out) throw std::runtime_error("failed to write table output");
}

void emit_tables(const std::vector<RunResult>& results, TableFormat format, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::system_error(errno, std::generic_category(), "cannot open '" + path + "'");
  emit_tables(results, format, f);
}

}  // namespace trimcp
