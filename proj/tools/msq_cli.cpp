// SPDX-License-Identifier: Apache-2.0
// Batch driver: solve a diffusion model from a config, run the QBD or
// simulation oracle, or diff two report CSVs.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "msq/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> quad_order;
  std::optional<double> element_size;
  std::optional<double> epsilon0;
};

msq::RunConfig load(const std::string& file, const Overrides& o) {
  msq::RunConfig cfg = msq::load_config(file);
  if (o.seed) cfg.simulation.seed = *o.seed;
  if (o.quad_order) {
    msq::require(*o.quad_order >= 1, "--quad-order must be >= 1");
    cfg.assembly_order = *o.quad_order;
  }
  if (o.element_size) {
    msq::require(*o.element_size > 0.0, "--element-size must be > 0");
    cfg.mesh.element_size = *o.element_size;
    cfg.mesh.counts.clear();
  }
  if (o.epsilon0) {
    msq::require(*o.epsilon0 > 0.0 && *o.epsilon0 < 1.0, "--epsilon0 must be in (0, 1)");
    cfg.epsilon0 = *o.epsilon0;
  }
  return cfg;
}

fs::path out_dir(const Overrides& o, const msq::RunConfig& cfg) {
  fs::path dir = o.out_dir.empty() ? fs::path("out") / cfg.name : fs::path(o.out_dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw msq::InvalidInput("cannot write '" + p.string() + "'");
  f << text;
}

std::string box_text(const msq::TruncationBox& b) {
  std::string s;
  for (int j = 0; j < b.dimension(); ++j) {
    if (j) s += " x ";
    s += "[" + msq::format_number(b.lower[static_cast<std::size_t>(j)]) + ", " +
         msq::format_number(b.upper[static_cast<std::size_t>(j)]) + "]";
  }
  return s;
}

void print_report(const std::string& title, const msq::PerformanceReport& rep) {
  std::cout << title << '\n';
  for (const auto& r : rep.rows()) {
    std::cout << "  " << r.measure << " = " << msq::format_number(r.value);
    if (!std::isnan(r.std_error)) std::cout << "  (se " << msq::format_number(r.std_error) << ")";
    std::cout << '\n';
  }
  for (const auto& w : rep.warnings) std::cout << "  warning: " << w << '\n';
}

int cmd_solve(const std::string& file, const Overrides& o) {
  const auto cfg = load(file, o);
  const auto dir = out_dir(o, cfg);
  msq::ModelRun run;
  try {
    run = msq::run_model(cfg);
  } catch (const msq::NumericalFailure& e) {
    std::ostringstream d;
    d << "config: " << file << "\nstatus: degenerate solution\nmessage: " << e.what()
      << "\nhint: the reference density is suspect; it may decay faster than the stationary density\n";
    write_file(dir / "diagnostics.txt", d.str());
    std::cerr << file << ": " << e.what() << "\n";
    return 3;
  }
  const auto& dg = run.diagnostics;
  std::ostringstream d;
  d << "config: " << file << "\n"
    << "status: " << (dg.suspect_reference ? "suspect reference density" : "ok") << "\n"
    << "model: " << msq::to_string(cfg.model) << "\n"
    << "reference: " << run.recipe.rule << " (alpha " << msq::format_number(run.recipe.alpha) << ", q0 "
    << msq::format_number(run.recipe.q0) << ", beta " << msq::format_number(run.recipe.beta) << ")\n"
    << "box: " << box_text(run.box) << (run.auto_box ? " (auto)" : " (config)") << "\n"
    << "excluded reference mass: " << msq::format_number(run.excluded_reference_mass) << "\n"
    << "quadrature: assembly " << cfg.assembly_order << ", tail " << cfg.tail_order << " ("
    << (cfg.cut_rule == msq::CutRule::Split ? "split" : "indicator") << ")\n"
    << "m_C: " << dg.unknowns << "\n"
    << "Constructing A and v: " << dg.assembly_seconds << " s\n"
    << "Solving: " << dg.solve_seconds << " s\n"
    << "residual: " << dg.residual << "\n"
    << "condition estimate: " << dg.condition_estimate << "\n"
    << "scaled condition estimate: " << dg.scaled_condition_estimate << "\n"
    << "||c - cbar||^2: " << dg.norm_sq << "\n"
    << "integral of g: " << dg.normalization << "\n"
    << "negative mass: " << dg.negative_mass << "\n";
  for (const auto& w : run.report.warnings) d << "warning: " << w << "\n";
  write_file(dir / "diagnostics.txt", d.str());
  write_file(dir / "report.csv", msq::report_csv(run.report));
  if (cfg.outputs.pmf_range) write_file(dir / "pmf.csv", msq::pmf_csv(run.pmf));
  if (!run.grid_csv.empty()) write_file(dir / "density_grid.csv", run.grid_csv);
  print_report(cfg.name + " (" + msq::to_string(cfg.model) + ")", run.report);
  std::cout << "  m_C " << dg.unknowns << ", assembly " << dg.assembly_seconds << " s, solve " << dg.solve_seconds
            << " s, condition " << dg.condition_estimate << "\n  outputs in " << dir.string() << "\n";
  return 0;
}

int cmd_qbd(const std::string& file, const Overrides& o) {
  const auto cfg = load(file, o);
  const auto spec = msq::qbd_spec_for(cfg);
  const auto dir = out_dir(o, cfg);
  const auto start = std::chrono::steady_clock::now();
  const auto res = msq::qbd_stationary(spec, cfg.outputs.tail_levels);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_file(dir / "qbd_report.csv", msq::report_csv(res.report));
  write_file(dir / "qbd_pmf.csv", msq::pmf_csv(res.report));
  std::ostringstream d;
  d << "config: " << file << "\nlevels: 0.." << spec.cap() << "\nmass above cap: " << res.tail_mass_above_cap
    << "\nseconds: " << secs << "\n";
  write_file(dir / "qbd_diagnostics.txt", d.str());
  print_report(cfg.name + " (QBD)", res.report);
  std::cout << "  " << secs << " s, outputs in " << dir.string() << "\n";
  return 0;
}

int cmd_sim(const std::string& file, const Overrides& o) {
  const auto cfg = load(file, o);
  const auto spec = msq::sim_spec_for(cfg);
  const auto dir = out_dir(o, cfg);
  const auto res = msq::simulate(spec);
  write_file(dir / "sim_report.csv", msq::report_csv(res.report));
  std::ostringstream reps;
  reps << "replication,arrivals,departures,abandonments,in_system,patience_violations,mean_queue_length,"
          "abandonment_fraction\n";
  for (std::size_t i = 0; i < res.replications.size(); ++i) {
    const auto& r = res.replications[i];
    reps << i << ',' << r.counters.arrivals << ',' << r.counters.departures << ',' << r.counters.abandonments << ','
         << r.counters.in_system << ',' << r.counters.patience_violations << ',' << msq::format_number(r.mean_queue_length)
         << ',' << msq::format_number(r.abandonment_fraction) << '\n';
  }
  write_file(dir / "sim_replications.csv", reps.str());
  print_report(cfg.name + " (simulation, " + std::to_string(spec.replications) + " replications)", res.report);
  std::cout << "  outputs in " << dir.string() << "\n";
  return 0;
}

int cmd_compare(const std::string& a, const std::string& b, double tol, bool strict) {
  const auto rows = msq::compare_reports(msq::read_report_csv(a), msq::read_report_csv(b), tol);
  std::cout << msq::comparison_csv(rows);
  bool flagged = false;
  for (const auto& r : rows) flagged = flagged || r.flagged;
  return strict && flagged ? 4 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stationary distributions of many-server queue diffusion models"};
  app.require_subcommand(1);
  app.fallthrough();
  Overrides o;
  app.add_option("--out-dir", o.out_dir, "Output directory (default out/<config name>)");
  app.add_option("--seed", o.seed, "Simulation seed override");
  app.add_option("--quad-order", o.quad_order, "Assembly Gauss order override");
  app.add_option("--element-size", o.element_size, "Element size override");
  app.add_option("--epsilon0", o.epsilon0, "Truncation mass override");

  std::string config;
  auto* solve = app.add_subcommand("solve", "Solve the diffusion model of a config");
  solve->add_option("config", config, "Config file")->required()->check(CLI::ExistingFile);

  auto* oracle = app.add_subcommand("oracle", "Run a ground-truth oracle");
  oracle->require_subcommand(1);
  oracle->fallthrough();
  auto* qbd = oracle->add_subcommand("qbd", "Matrix-analytic QBD solver (M/H2/n+M)");
  qbd->add_option("config", config, "Config file")->required()->check(CLI::ExistingFile);
  auto* sim = oracle->add_subcommand("sim", "Discrete-event simulation");
  sim->add_option("config", config, "Config file")->required()->check(CLI::ExistingFile);

  std::string a;
  std::string b;
  double tol = 1e-3;
  bool strict = false;
  auto* cmp = app.add_subcommand("compare", "Row-aligned diff of two report CSVs (second is the reference)");
  cmp->add_option("a", a, "First report")->required()->check(CLI::ExistingFile);
  cmp->add_option("b", b, "Reference report")->required()->check(CLI::ExistingFile);
  cmp->add_option("--tolerance", tol, "Relative tolerance for flagging rows");
  cmp->add_flag("--strict", strict, "Exit with status 4 when any row is flagged");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*solve) return cmd_solve(config, o);
    if (*qbd) return cmd_qbd(config, o);
    if (*sim) return cmd_sim(config, o);
    if (*cmp) return cmd_compare(a, b, tol, strict);
  } catch (const msq::InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const msq::NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
