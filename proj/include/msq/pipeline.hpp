// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "msq/config.hpp"
#include "msq/fem.hpp"
#include "msq/measures.hpp"
#include "msq/mesh.hpp"
#include "msq/model.hpp"
#include "msq/qbd.hpp"
#include "msq/refdensity.hpp"
#include "msq/report.hpp"
#include "msq/simulator.hpp"

namespace msq {

/// Everything a model run produces besides files.
struct ModelRun {
  PerformanceReport report;
  PerformanceReport pmf;  ///< empty unless outputs.pmf_range is set
  SolveDiagnostics diagnostics;
  ReferenceRecipe recipe;
  TruncationBox box;
  bool auto_box = false;
  double excluded_reference_mass = 0.0;
  std::string grid_csv;  ///< empty unless outputs.density_grid is set
};

inline ReferenceDensity reference_for(const RunConfig& cfg) {
  return cfg.reference == ReferenceKind::Naive ? naive_reference(cfg.scenario)
                                               : build_reference(cfg.scenario, cfg.model, cfg.reference_options);
}

namespace detail {

template <int Dim>
std::string density_grid_csv(const SolutionField<Dim>& field, double step) {
  std::ostringstream out;
  const auto& mesh = field.mesh();
  const auto& r = field.reference();
  auto axis = [&](int j) {
    std::vector<double> xs;
    const double lo = mesh.lower(j);
    const double hi = mesh.upper(j);
    const long count = std::lround(std::floor((hi - lo) / step + 1e-9));
    for (long k = 0; k <= count; ++k) xs.push_back(lo + static_cast<double>(k) * step);
    return xs;
  };
  if constexpr (Dim == 1) {
    out << "x1,r,q,g\n";
    for (double x : axis(0)) {
      out << format_number(x) << ',' << format_number(r(&x)) << ',' << format_number(field.ratio(&x)) << ','
          << format_number(field.density(&x)) << '\n';
    }
  } else if constexpr (Dim == 2) {
    out << "x1,x2,r,q,g\n";
    const auto xs = axis(0);
    for (double y : axis(1)) {
      for (double x : xs) {
        const std::array<double, 2> p{x, y};
        out << format_number(x) << ',' << format_number(y) << ',' << format_number(r(p.data())) << ','
            << format_number(field.ratio(p.data())) << ',' << format_number(field.density(p.data())) << '\n';
      }
    }
  }
  return out.str();
}

template <int Dim>
ModelRun run_model_dim(const RunConfig& cfg) {
  ModelRun run;
  const auto r = reference_for(cfg);
  run.recipe = r.recipe();
  const auto dm = build_model(cfg.scenario, cfg.model);
  if (cfg.mesh.box) {
    run.box = *cfg.mesh.box;
  } else {
    const double grid = cfg.mesh.counts.empty() ? std::max(1.0, cfg.mesh.element_size) : 1.0;
    run.box = choose_truncation_box(r, cfg.epsilon0, grid, cfg.mesh.auto_max_lower);
    run.auto_box = true;
  }
  run.excluded_reference_mass = excluded_mass(r, run.box);
  LatticeMesh<Dim> mesh = [&] {
    if (cfg.mesh.counts.empty()) return build_mesh<Dim>(run.box, cfg.mesh.element_size);
    std::array<int, Dim> counts{};
    for (int j = 0; j < Dim; ++j) counts[j] = cfg.mesh.counts[static_cast<std::size_t>(j)];
    return build_mesh<Dim>(run.box, counts);
  }();
  AssemblyOptions ao;
  ao.quadrature_order = cfg.assembly_order;
  const auto sys = assemble(dm, r, mesh, ao);
  const auto field = solve_field(sys, dm, r, mesh);
  MeasureOptions mo;
  mo.tail_order = cfg.tail_order;
  mo.cut_rule = cfg.cut_rule;
  run.report = summary(field, cfg.scenario, cfg.outputs.tail_levels, mo);
  run.diagnostics = field.diagnostics();
  if (run.excluded_reference_mass > cfg.epsilon0) {
    run.report.warnings.push_back("reference mass outside the box " + format_number(run.excluded_reference_mass) +
                                  " exceeds epsilon0");
  }
  if (cfg.outputs.pmf_range) {
    if constexpr (Dim <= 2) {
      run.pmf = queue_count_pmf(field, cfg.scenario, cfg.outputs.pmf_range->first, cfg.outputs.pmf_range->second);
      for (const auto& w : run.pmf.warnings) run.report.warnings.push_back(w);
    } else {
      run.report.warnings.push_back("pmf output skipped: supported for dimension <= 2");
    }
  }
  if (cfg.outputs.density_grid) {
    if constexpr (Dim <= 2) {
      run.grid_csv = density_grid_csv(field, cfg.outputs.density_grid->step);
    } else {
      run.report.warnings.push_back("density grid skipped: supported for dimension <= 2");
    }
  }
  return run;
}

}  // namespace detail

/// Reference density, box, mesh, assembly, solve and measures for one config.
/// Supports service phase counts 1 to 3.
inline ModelRun run_model(const RunConfig& cfg) {
  switch (cfg.scenario.dimension()) {
    case 1:
      return detail::run_model_dim<1>(cfg);
    case 2:
      return detail::run_model_dim<2>(cfg);
    case 3:
      return detail::run_model_dim<3>(cfg);
    default:
      throw InvalidInput("solve: service phase count " + std::to_string(cfg.scenario.dimension()) +
                         " unsupported (1 to 3)");
  }
}

inline QbdSpec qbd_spec_for(const RunConfig& cfg) {
  const auto& sc = cfg.scenario;
  require(std::holds_alternative<PoissonArrivals>(sc.arrivals), "qbd: arrivals must be Poisson");
  require(sc.dimension() <= 2, "qbd: service must have at most two phases");
  require(sc.service.P.isZero(0.0), "qbd: service must be hyperexponential (no phase routing)");
  QbdSpec q;
  q.n = sc.n;
  q.lambda = sc.lambda;
  q.p = sc.service.p;
  q.nu = sc.service.nu;
  q.cap_offset = cfg.qbd.cap_offset;
  if (const auto* e = std::get_if<ExponentialPatience>(&sc.patience)) {
    q.alpha = e->rate;
  } else {
    require(std::holds_alternative<NoPatience>(sc.patience),
            "qbd: patience must be exponential or absent (state space is too large otherwise)");
  }
  return q;
}

inline SimSpec sim_spec_for(const RunConfig& cfg) {
  SimSpec s;
  s.scenario = cfg.scenario;
  s.replications = cfg.simulation.replications;
  s.horizon = cfg.simulation.horizon;
  s.warmup_fraction = cfg.simulation.warmup_fraction;
  s.seed = cfg.simulation.seed;
  s.threads = cfg.simulation.threads;
  s.tail_levels = cfg.outputs.tail_levels;
  return s;
}

}  // namespace msq
