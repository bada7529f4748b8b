// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "msq/error.hpp"
#include "msq/fem.hpp"
#include "msq/model.hpp"
#include "msq/quadrature.hpp"

namespace msq {

inline constexpr double kNoValue = std::numeric_limits<double>::quiet_NaN();

struct ReportRow {
  std::string measure;
  double value = kNoValue;
  double std_error = kNoValue;
};

inline std::string tail_row_name(int level) { return "P[N>" + std::to_string(level) + "]"; }

/// Queue-level measures shared by the model and both oracles.
struct PerformanceReport {
  double mean_queue_length = kNoValue;
  double mean_idle_servers = kNoValue;
  double abandonment_fraction = kNoValue;
  std::vector<std::pair<int, double>> tail;  ///< (level l, P[N > l])
  int pmf_first = 0;
  std::vector<double> pmf;  ///< P[N = pmf_first + i]
  std::map<std::string, double> std_error;  ///< keyed by row name
  std::vector<std::string> warnings;

  [[nodiscard]] std::vector<ReportRow> rows() const {
    std::vector<ReportRow> out;
    auto add = [&](const std::string& name, double v) {
      if (std::isnan(v)) return;
      const auto it = std_error.find(name);
      out.push_back({name, v, it == std_error.end() ? kNoValue : it->second});
    };
    add("mean_queue_length", mean_queue_length);
    add("mean_idle_servers", mean_idle_servers);
    add("abandonment_fraction", abandonment_fraction);
    for (const auto& [level, p] : tail) add(tail_row_name(level), p);
    return out;
  }

  [[nodiscard]] double tail_at(int level) const {
    for (const auto& [l, p] : tail) {
      if (l == level) return p;
    }
    throw InvalidInput("report: tail level " + std::to_string(level) + " not present");
  }
};

struct MeasureOptions {
  int tail_order = 64;  ///< Gauss order on elements cut by a hyperplane e'x = z
  CutRule cut_rule = CutRule::Indicator;
};

namespace detail {

template <int Dim>
double coordinate_sum(const std::array<double, Dim>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s;
}

}  // namespace detail

/// P[e'X > z] = integral of g over {e'x > z} within K.
template <int Dim>
double tail_probability(const SolutionField<Dim>& field, double z, const MeasureOptions& opt = {}) {
  double total = 0.0;
  field.for_each_halfspace_point(z, 1, field.quadrature_order(), opt.tail_order, opt.cut_rule,
                                 [&](const std::array<double, Dim>&, double g, double w) { total += w * g; });
  return total;
}

/// P[N > l] via the scaled level z = (l - n)/sqrt(n).
template <int Dim>
double level_tail_probability(const SolutionField<Dim>& field, const QueueScenario& sc, int level,
                              const MeasureOptions& opt = {}) {
  const double rn = std::sqrt(static_cast<double>(sc.n));
  return tail_probability(field, (level - sc.n) / rn, opt);
}

/// Density of e'X at z: integral of g along the hyperplane e'x = z.
template <int Dim>
double sum_density(const SolutionField<Dim>& field, double z) {
  const auto& mesh = field.mesh();
  if constexpr (Dim == 1) {
    const double x = z;
    return field.density(&x);
  } else if constexpr (Dim == 2) {
    const double lo = std::max(mesh.lower(0), z - mesh.upper(1));
    const double hi = std::min(mesh.upper(0), z - mesh.lower(1));
    if (!(hi > lo)) return 0.0;
    std::vector<double> cuts{lo, hi};
    for (double y : mesh.points(0)) {
      if (y > lo && y < hi) cuts.push_back(y);
    }
    for (double y : mesh.points(1)) {
      const double x1 = z - y;
      if (x1 > lo && x1 < hi) cuts.push_back(x1);
    }
    std::sort(cuts.begin(), cuts.end());
    const GaussRule rule = gauss_legendre(field.quadrature_order());
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      const double a = cuts[k];
      const double len = cuts[k + 1] - a;
      if (len <= 0.0) continue;
      for (int i = 0; i < rule.order(); ++i) {
        const double x1 = a + len * rule.nodes[static_cast<std::size_t>(i)];
        const std::array<double, 2> x{x1, z - x1};
        total += len * rule.weights[static_cast<std::size_t>(i)] * field.density(x);
      }
    }
    return total;
  } else {
    throw InvalidInput("measures: customer-count pmf is supported for dimension <= 2");
  }
}

/// P[N = i] ~ n^{-1/2} g_N((i - n)/sqrt(n)) for i in [first, last].
template <int Dim>
PerformanceReport queue_count_pmf(const SolutionField<Dim>& field, const QueueScenario& sc, int first, int last) {
  require(first >= 0 && last >= first, "measures: invalid pmf range");
  PerformanceReport rep;
  rep.pmf_first = first;
  const double rn = std::sqrt(static_cast<double>(sc.n));
  const auto& mesh = field.mesh();
  double zmin = 0.0;
  double zmax = 0.0;
  for (int j = 0; j < Dim; ++j) {
    zmin += mesh.lower(j);
    zmax += mesh.upper(j);
  }
  bool outside = false;
  for (int i = first; i <= last; ++i) {
    const double z = (i - sc.n) / rn;
    if (z < zmin || z > zmax) {
      outside = true;
      rep.pmf.push_back(0.0);
      continue;
    }
    rep.pmf.push_back(sum_density(field, z) / rn);
  }
  if (outside) rep.warnings.push_back("pmf range extends outside the truncation box; zeros reported there");
  return rep;
}

/// Mean queue length, idle servers, abandonment fraction and requested tails.
template <int Dim>
PerformanceReport summary(const SolutionField<Dim>& field, const QueueScenario& sc, const std::vector<int>& levels,
                          const MeasureOptions& opt = {}) {
  PerformanceReport rep;
  const double rn = std::sqrt(static_cast<double>(sc.n));
  double pos = 0.0;
  double neg = 0.0;
  const int smooth = field.quadrature_order();
  field.for_each_halfspace_point(0.0, 1, smooth, opt.tail_order, opt.cut_rule,
                                 [&](const std::array<double, Dim>& x, double g, double w) {
                                   pos += w * g * detail::coordinate_sum<Dim>(x);
                                 });
  field.for_each_halfspace_point(0.0, -1, smooth, opt.tail_order, opt.cut_rule,
                                 [&](const std::array<double, Dim>& x, double g, double w) {
                                   neg -= w * g * detail::coordinate_sum<Dim>(x);
                                 });
  rep.mean_queue_length = rn * pos;
  rep.mean_idle_servers = rn * neg;
  // Without patience every arrival is served; the flow identity would only echo discretization error.
  rep.abandonment_fraction =
      has_patience(sc.patience) ? 1.0 - sc.constants.mu / sc.lambda * (sc.n - rn * neg) : 0.0;
  for (int l : levels) rep.tail.emplace_back(l, level_tail_probability(field, sc, l, opt));
  rep.warnings = field.diagnostics().warnings;
  return rep;
}

}  // namespace msq
