// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "msq/error.hpp"
#include "msq/measures.hpp"

namespace msq {

/// Shortest round-trip text for a double; NaN becomes the empty string.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// measure,value,std_error
inline std::string report_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  out << "measure,value,std_error\n";
  for (const auto& r : rows) out << r.measure << ',' << format_number(r.value) << ',' << format_number(r.std_error) << '\n';
  return out.str();
}

inline std::string report_csv(const PerformanceReport& rep) { return report_csv(rep.rows()); }

/// level,probability
inline std::string pmf_csv(const PerformanceReport& rep) {
  std::ostringstream out;
  out << "level,probability\n";
  for (std::size_t i = 0; i < rep.pmf.size(); ++i) {
    out << rep.pmf_first + static_cast<int>(i) << ',' << format_number(rep.pmf[i]) << '\n';
  }
  return out.str();
}

inline std::vector<ReportRow> parse_report_csv(std::istream& in, const std::string& label) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("measure,value", 0) != 0) {
    throw InvalidInput(label + ": missing 'measure,value,std_error' header");
  }
  std::vector<ReportRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (cells.size() < 2 || cells.size() > 3) {
      throw InvalidInput(label + ":" + std::to_string(lineno) + ": expected 2 or 3 columns");
    }
    ReportRow r;
    r.measure = cells[0];
    try {
      r.value = std::stod(cells[1]);
      if (cells.size() == 3 && !cells[2].empty()) r.std_error = std::stod(cells[2]);
    } catch (const std::exception&) {
      throw InvalidInput(label + ":" + std::to_string(lineno) + ": not a number");
    }
    rows.push_back(r);
  }
  return rows;
}

inline std::vector<ReportRow> read_report_csv(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw InvalidInput("cannot open '" + file + "'");
  return parse_report_csv(in, file);
}

struct ComparisonRow {
  std::string measure;
  double a = 0.0;
  double b = 0.0;
  double abs_diff = 0.0;
  double rel_diff = 0.0;  ///< |a - b| / |b|, inf when b = 0 != a
  bool flagged = false;
};

/// Row-aligned diff with b as the reference; rows over tolerance are flagged.
inline std::vector<ComparisonRow> compare_reports(const std::vector<ReportRow>& a, const std::vector<ReportRow>& b,
                                                  double rel_tolerance) {
  std::map<std::string, double> bm;
  for (const auto& r : b) bm[r.measure] = r.value;
  std::vector<std::string> missing;
  for (const auto& r : a) {
    if (!bm.count(r.measure)) missing.push_back(r.measure + " (only in first)");
  }
  std::map<std::string, double> am;
  for (const auto& r : a) am[r.measure] = r.value;
  for (const auto& r : b) {
    if (!am.count(r.measure)) missing.push_back(r.measure + " (only in second)");
  }
  if (!missing.empty()) {
    std::string msg = "compare: row sets differ:";
    for (const auto& m : missing) msg += " " + m;
    throw InvalidInput(msg);
  }
  std::vector<ComparisonRow> out;
  for (const auto& r : a) {
    ComparisonRow c;
    c.measure = r.measure;
    c.a = r.value;
    c.b = bm[r.measure];
    c.abs_diff = std::abs(c.a - c.b);
    c.rel_diff = c.b != 0.0 ? c.abs_diff / std::abs(c.b) : (c.abs_diff == 0.0 ? 0.0 : INFINITY);
    c.flagged = c.rel_diff > rel_tolerance;
    out.push_back(c);
  }
  return out;
}

inline std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream out;
  out << "measure,a,b,abs_diff,rel_diff,flag\n";
  for (const auto& r : rows) {
    out << r.measure << ',' << format_number(r.a) << ',' << format_number(r.b) << ',' << format_number(r.abs_diff) << ','
        << format_number(r.rel_diff) << ',' << (r.flagged ? "EXCEEDS" : "ok") << '\n';
  }
  return out.str();
}

}  // namespace msq
