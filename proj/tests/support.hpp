// SPDX-License-Identifier: Apache-2.0
// Independent oracles and reusable property checks. The unit tests and the
// acceptance binary both link against these, so every check is written once.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>

#include "msq/pipeline.hpp"

namespace msqtest {

inline std::string config_path(const std::string& name) { return std::string(MSQ_CONFIG_DIR) + "/" + name + ".json"; }

struct Check {
  bool ok = true;
  std::string detail;

  void fail(const std::string& why) {
    ok = false;
    if (!detail.empty()) detail += "; ";
    detail += why;
  }
};

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// ---------------------------------------------------------------------------
// Birth-death chain for M/M/n+M (alpha = 0 gives M/M/n). Exact up to the
// truncation level, chosen where the log mass has dropped by 80 decades.

struct BirthDeath {
  std::vector<double> pmf;

  BirthDeath(int n, double lambda, double mu, double alpha) {
    std::vector<double> logp{0.0};
    double peak = 0.0;
    for (int l = 1;; ++l) {
      const double down = std::min(l, n) * mu + alpha * std::max(0, l - n);
      logp.push_back(logp.back() + std::log(lambda / down));
      peak = std::max(peak, logp.back());
      if (l > n + 10 && logp.back() < peak - 184.0) break;
    }
    double s = 0.0;
    for (double v : logp) s += std::exp(v - peak);
    for (double v : logp) pmf.push_back(std::exp(v - peak) / s);
  }

  [[nodiscard]] double tail(int l) const {
    double s = 0.0;
    for (std::size_t k = static_cast<std::size_t>(l) + 1; k < pmf.size(); ++k) s += pmf[k];
    return s;
  }
  [[nodiscard]] double mean_queue(int n) const {
    double s = 0.0;
    for (std::size_t k = static_cast<std::size_t>(n); k < pmf.size(); ++k) s += (static_cast<double>(k) - n) * pmf[k];
    return s;
  }
  [[nodiscard]] double mean_idle(int n) const {
    double s = 0.0;
    for (int k = 0; k < n; ++k) s += (n - k) * pmf[static_cast<std::size_t>(k)];
    return s;
  }
};

// ---------------------------------------------------------------------------
// Piecewise normal / normal-exponential density of the scaled limit diffusion
// for exponential service (mu = 1 units kept explicit):
//   z < 0 : exp(-(z + beta)^2 / (1 + ca2))
//   z >= 0: exp(-2 beta z / (1 + ca2))                       alpha = 0
//           exp(-alpha (z + mu beta / alpha)^2 / (mu (1 + ca2)))   alpha > 0
// continuous at 0, normalized in closed form with erfc.

struct ClosedFormDensity1D {
  double beta = 0.0;
  double ca2 = 1.0;
  double alpha = 0.0;
  double mu = 1.0;

  [[nodiscard]] double log_unnormalized(double z) const {
    const double c = 1.0 + ca2;
    if (z < 0.0) return -(z + beta) * (z + beta) / c;
    if (alpha == 0.0) return -beta * beta / c - 2.0 * beta * z / c;
    const double m = mu * beta / alpha;
    const double k = alpha / (mu * c);
    // log a4 = -beta^2/c + k m^2 makes the branch continuous at 0
    return -beta * beta / c + k * m * m - k * (z + m) * (z + m);
  }

  [[nodiscard]] double mass() const {
    const double c = 1.0 + ca2;
    const double left = 0.5 * std::sqrt(M_PI * c) * std::erfc(-beta / std::sqrt(c));
    double right = 0.0;
    if (alpha == 0.0) {
      right = std::exp(-beta * beta / c) * c / (2.0 * beta);
    } else {
      const double m = mu * beta / alpha;
      const double k = alpha / (mu * c);
      right = std::exp(-beta * beta / c + k * m * m) * 0.5 * std::sqrt(M_PI / k) * std::erfc(m * std::sqrt(k));
    }
    return left + right;
  }

  [[nodiscard]] double operator()(double z) const { return std::exp(log_unnormalized(z)) / mass(); }

  /// P[Z > z] by 1-d Gauss-Legendre on both smooth pieces.
  [[nodiscard]] double tail(double z, double upper = 60.0) const {
    auto f = [this](double x) { return (*this)(x); };
    double s = 0.0;
    for (double hi = 0.0; hi > z; hi -= 1.0) {
      s += boost::math::quadrature::gauss<double, 30>::integrate(f, std::max(z, hi - 1.0), hi);
    }
    const double a = std::max(z, 0.0);
    for (double lo = a; lo < upper; lo += 1.0) {
      s += boost::math::quadrature::gauss<double, 30>::integrate(f, lo, std::min(lo + 1.0, upper));
    }
    return s;
  }
};

// ---------------------------------------------------------------------------
// FEM fixtures

template <int Dim>
struct Solved {
  msq::LatticeMesh<Dim> mesh;
  msq::LinearSystem sys;
  msq::SolutionField<Dim> field;
};

template <int Dim>
Solved<Dim> solve_on(const msq::DiffusionModel& dm, const msq::ReferenceDensity& r, const msq::TruncationBox& box,
                     double h, int order = 8) {
  auto mesh = msq::build_mesh<Dim>(box, h);
  msq::AssemblyOptions ao;
  ao.quadrature_order = order;
  ao.threads = 1;
  auto sys = msq::assemble(dm, r, mesh, ao);
  msq::SolveOptions so;
  so.threads = 1;
  auto field = msq::solve_field(sys, dm, r, mesh, so);
  return Solved<Dim>{std::move(mesh), std::move(sys), std::move(field)};
}

/// Node and type of a global basis index, inverting the mesh's lexicographic
/// numbering independently of LatticeMesh::basis_index.
template <int Dim>
msq::HermiteBasis<Dim> basis_of(const msq::LatticeMesh<Dim>& mesh, std::int64_t index) {
  msq::HermiteBasis<Dim> b;
  const int flags = static_cast<int>(index & ((1 << Dim) - 1));
  std::int64_t lin = index >> Dim;
  for (int j = 0; j < Dim; ++j) {
    const std::int64_t interior = mesh.segments(j) - 1;
    b.node[j] = static_cast<int>(lin % interior) + 1;
    lin /= interior;
    b.type[j] = (flags >> j) & 1;
  }
  return b;
}

/// A_il = integral of (G f_i)(G f_l) r over the support of f_i, by a 20-point
/// Boost Gauss rule per axis on every element of the support.
template <int Dim>
double brute_force_entry(const msq::DiffusionModel& dm, const msq::ReferenceDensity& r,
                         const msq::LatticeMesh<Dim>& mesh, std::int64_t i, std::int64_t l) {
  static_assert(Dim == 1 || Dim == 2, "brute force entries are for small dimensions");
  const auto bi = basis_of(mesh, i);
  const auto bl = basis_of(mesh, l);
  using Rule = boost::math::quadrature::gauss<double, 20>;
  const auto& abs = Rule::abscissa();
  const auto& wts = Rule::weights();
  std::vector<std::pair<double, double>> rule1;  // on [-1, 1]
  for (std::size_t k = 0; k < abs.size(); ++k) {
    rule1.emplace_back(abs[k], wts[k]);
    if (abs[k] != 0.0) rule1.emplace_back(-abs[k], wts[k]);
  }
  auto gen = [&](const msq::HermiteBasis<Dim>& b, const Eigen::VectorXd& x) {
    const auto v = msq::evaluate_basis(mesh, b, x.data());
    Eigen::VectorXd g(Dim);
    Eigen::MatrixXd H(Dim, Dim);
    for (int m = 0; m < Dim; ++m) {
      g(m) = v.grad[m];
      for (int k = 0; k < Dim; ++k) H(m, k) = v.hess[m][k];
    }
    return msq::apply_generator(dm, x, g, H);
  };
  double total = 0.0;
  std::array<int, Dim> e{};
  const int corners = 1 << Dim;
  for (int c = 0; c < corners; ++c) {
    std::array<double, Dim> lo{};
    std::array<double, Dim> hi{};
    bool valid = true;
    for (int j = 0; j < Dim; ++j) {
      e[j] = bi.node[j] - 1 + ((c >> j) & 1);
      if (e[j] < 0 || e[j] >= mesh.segments(j)) valid = false;
      if (valid) {
        lo[j] = mesh.points(j)[static_cast<std::size_t>(e[j])];
        hi[j] = mesh.points(j)[static_cast<std::size_t>(e[j]) + 1];
      }
    }
    if (!valid) continue;
    if constexpr (Dim == 1) {
      for (const auto& [s, w] : rule1) {
        Eigen::VectorXd x(1);
        x(0) = 0.5 * (lo[0] + hi[0]) + 0.5 * (hi[0] - lo[0]) * s;
        total += 0.5 * (hi[0] - lo[0]) * w * gen(bi, x) * gen(bl, x) * r(x.data());
      }
    } else {
      for (const auto& [s1, w1] : rule1) {
        for (const auto& [s2, w2] : rule1) {
          Eigen::VectorXd x(2);
          x(0) = 0.5 * (lo[0] + hi[0]) + 0.5 * (hi[0] - lo[0]) * s1;
          x(1) = 0.5 * (lo[1] + hi[1]) + 0.5 * (hi[1] - lo[1]) * s2;
          const double vol = 0.25 * (hi[0] - lo[0]) * (hi[1] - lo[1]);
          total += vol * w1 * w2 * gen(bi, x) * gen(bl, x) * r(x.data());
        }
      }
    }
  }
  return total;
}

/// Small M/H2/n+M problem used by several property checks.
inline msq::RunConfig small_h2_config() {
  auto cfg = msq::load_config(config_path("example1_n20"));
  cfg.mesh.box = msq::TruncationBox::cube(2, -4.0, 6.0);
  cfg.mesh.element_size = 1.0;
  cfg.mesh.counts.clear();
  return cfg;
}

struct Error1D {
  double l1 = 0.0;
  double sup = 0.0;
};

/// FEM on the limit diffusion of a d = 1 config against the closed form.
inline Error1D closed_form_error(const char* name, double h) {
  const auto cfg = msq::load_config(config_path(name));
  const auto& sc = cfg.scenario;
  const auto dm = msq::limit_model(sc);
  const auto r = msq::reference_for(cfg);
  const auto s = solve_on<1>(dm, r, *cfg.mesh.box, h);
  const ClosedFormDensity1D exact{sc.beta, sc.ca2, msq::density_at_zero(sc.patience), sc.constants.mu};
  Error1D err;
  using Rule = boost::math::quadrature::gauss<double, 20>;
  const double lo = cfg.mesh.box->lower[0];
  const double hi = cfg.mesh.box->upper[0];
  for (double a = lo; a < hi - 1e-12; a += 0.125) {
    err.l1 += Rule::integrate([&](double x) { return std::abs(s.field.density(&x) - exact(x)); }, a, a + 0.125);
  }
  // mass of the exact density outside the box counts towards L1
  err.l1 += 1.0 - exact.tail(lo, hi);
  for (double x = lo; x <= hi; x += 0.01) err.sup = std::max(err.sup, std::abs(s.field.density(&x) - exact(x)));
  return err;
}

// ---------------------------------------------------------------------------
// Property checks

/// Cubic Hermite shapes: nodal values and slopes form the identity.
inline Check check_basis_cardinality() {
  Check c;
  for (double h : {0.25, 1.0, 3.0}) {
    for (int code = 0; code < 4; ++code) {
      const int corner = code >> 1;
      const int type = code & 1;
      for (int at = 0; at < 2; ++at) {
        const auto s = msq::hermite_shape(code, static_cast<double>(at), h);
        const double want_value = (at == corner && type == 0) ? 1.0 : 0.0;
        const double want_slope = (at == corner && type == 1) ? 1.0 : 0.0;
        if (std::abs(s.value - want_value) > 1e-14 || std::abs(s.d1 - want_slope) > 1e-14) {
          std::ostringstream m;
          m << "shape " << code << " at node " << at << " (h=" << h << "): value " << s.value << ", slope " << s.d1;
          c.fail(m.str());
        }
      }
    }
  }
  // Tensor basis on a nonuniform 2-d mesh: f_(node,type) at node' has value
  // delta(node, node') delta(type, 0) and gradient delta(node, node') e_type.
  const msq::LatticeMesh<2> mesh({std::vector<double>{-1.0, -0.3, 0.5, 2.0}, std::vector<double>{0.0, 0.7, 1.1, 3.0}});
  for (int i = 1; i <= 2; ++i) {
    for (int j = 1; j <= 2; ++j) {
      for (int t = 0; t < 4; ++t) {
        msq::HermiteBasis<2> b{{i, j}, {t & 1, t >> 1}};
        for (int a = 0; a <= 3; ++a) {
          for (int bb = 0; bb <= 3; ++bb) {
            const double x[2] = {mesh.points(0)[static_cast<std::size_t>(a)], mesh.points(1)[static_cast<std::size_t>(bb)]};
            const auto v = msq::evaluate_basis(mesh, b, x);
            const bool same = a == i && bb == j;
            const double want_v = same && t == 0 ? 1.0 : 0.0;
            const double want_g0 = same && t == 1 ? 1.0 : 0.0;
            const double want_g1 = same && t == 2 ? 1.0 : 0.0;
            if (std::abs(v.value - want_v) > 1e-13 || std::abs(v.grad[0] - want_g0) > 1e-13 ||
                std::abs(v.grad[1] - want_g1) > 1e-13) {
              c.fail("tensor basis not cardinal at a mesh node");
            }
          }
        }
      }
    }
  }
  return c;
}

/// Any cubic on an element is reproduced from its end values and slopes, with
/// first and second derivatives.
inline Check check_cubic_reproduction() {
  Check c;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-2.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double a0 = U(rng), a1 = U(rng), a2 = U(rng), a3 = U(rng);
    const double lo = U(rng);
    const double h = 0.1 + std::abs(U(rng));
    auto f = [&](double x) { return a0 + a1 * x + a2 * x * x + a3 * x * x * x; };
    auto df = [&](double x) { return a1 + 2 * a2 * x + 3 * a3 * x * x; };
    auto d2f = [&](double x) { return 2 * a2 + 6 * a3 * x; };
    const double coef[4] = {f(lo), df(lo), f(lo + h), df(lo + h)};
    for (double t : {0.0, 0.13, 0.5, 0.77, 1.0}) {
      double v = 0.0, d1 = 0.0, d2 = 0.0;
      for (int code = 0; code < 4; ++code) {
        const auto s = msq::hermite_shape(code, t, h);
        v += coef[code] * s.value;
        d1 += coef[code] * s.d1;
        d2 += coef[code] * s.d2;
      }
      const double x = lo + t * h;
      const double scale = 1.0 + std::abs(f(x)) + std::abs(df(x)) + std::abs(d2f(x));
      if (std::abs(v - f(x)) > 1e-11 * scale || std::abs(d1 - df(x)) > 1e-10 * scale ||
          std::abs(d2 - d2f(x)) > 1e-9 * scale) {
        c.fail("cubic not reproduced at t=" + std::to_string(t));
        return c;
      }
    }
  }
  return c;
}

/// Assembled A is stored lower, matches brute-force entries in both index
/// orders, and is positive definite; the solve residual is below 1e-8 and the
/// density integrates to 1 within 1e-6.
inline Check check_system_properties() {
  Check c;
  const auto cfg = small_h2_config();
  const auto r = msq::reference_for(cfg);
  const auto dm = msq::build_model(cfg.scenario, cfg.model);
  // same 20-point rule as the brute force; lower orders differ by genuine quadrature
  // error on the kinked integrand (about 3e-5 relative at order 8)
  auto s = solve_on<2>(dm, r, *cfg.mesh.box, 1.0, 20);
  const auto& A = s.sys.A;
  const Eigen::MatrixXd lower = Eigen::MatrixXd(A);
  if (lower.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().cwiseAbs().maxCoeff() != 0.0) {
    c.fail("A stores entries above the diagonal");
  }
  const Eigen::SparseMatrix<double> sym = A.selfadjointView<Eigen::Lower>();
  const Eigen::MatrixXd full = Eigen::MatrixXd(sym);
  const double amax = full.cwiseAbs().maxCoeff();
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::int64_t> pick(0, full.rows() - 1);
  double worst = 0.0;
  for (int k = 0; k < 40; ++k) {
    const std::int64_t i = pick(rng);
    // neighbours give nonzero entries; random partners mostly give zeros
    const std::int64_t l = k % 2 ? pick(rng) : std::clamp<std::int64_t>(i + (k % 7) - 3, 0, full.rows() - 1);
    const double bij = brute_force_entry<2>(dm, r, s.mesh, i, l);
    const double bji = brute_force_entry<2>(dm, r, s.mesh, l, i);
    worst = std::max({worst, std::abs(bij - full(i, l)) / amax, std::abs(bji - full(l, i)) / amax});
  }
  if (worst > 1e-12) c.fail("A entries differ from brute force by " + std::to_string(worst) + " relative");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(full, Eigen::EigenvaluesOnly);
  if (!(eig.eigenvalues().minCoeff() > 0.0)) c.fail("A is not positive definite");
  const auto& d = s.field.diagnostics();
  if (!(d.residual < 1e-8)) c.fail("residual " + std::to_string(d.residual));
  if (!(std::abs(d.normalization - 1.0) < 1e-6)) c.fail("normalization " + std::to_string(d.normalization));
  std::ostringstream m;
  m << "m_C " << d.unknowns << ", brute-force gap " << worst << ", min eigenvalue " << eig.eigenvalues().minCoeff()
    << ", residual " << d.residual << ", integral of g " << d.normalization;
  if (c.ok) c.detail = m.str();
  return c;
}

/// The drift is continuous across e'x = 0 and linear on each side.
inline Check check_drift_hinge() {
  Check c;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> N01;
  for (const char* name : {"example1_n50", "example3_erlang2_n50", "example4_n50"}) {
    const auto cfg = msq::load_config(config_path(name));
    const auto dm = msq::build_model(cfg.scenario, cfg.model);
    const int d = dm.dimension();
    for (int trial = 0; trial < 200; ++trial) {
      Eigen::VectorXd x(d);
      for (int j = 0; j < d; ++j) x(j) = 3.0 * N01(rng);
      x(d - 1) -= x.sum();  // on the hyperplane
      Eigen::VectorXd e = Eigen::VectorXd::Ones(d) / d;
      const double eps = 1e-9;
      const Eigen::VectorXd up = dm.drift(Eigen::VectorXd(x + eps * e));
      const Eigen::VectorXd dn = dm.drift(Eigen::VectorXd(x - eps * e));
      if ((up - dn).norm() > 1e-6) c.fail(std::string(name) + ": drift jumps across e'x = 0");
      // below the hyperplane the drift is affine: midpoint rule is exact
      Eigen::VectorXd y(d);
      for (int j = 0; j < d; ++j) y(j) = 3.0 * N01(rng);
      y(d - 1) -= y.sum() + 1.0 + std::abs(N01(rng));
      const Eigen::VectorXd xm = x - Eigen::VectorXd::Ones(d);
      const Eigen::VectorXd mid = dm.drift(Eigen::VectorXd(0.5 * (xm + y)));
      const Eigen::VectorXd avg = 0.5 * (dm.drift(xm) + dm.drift(y));
      if ((mid - avg).norm() > 1e-9 * (1.0 + avg.norm())) c.fail(std::string(name) + ": drift not affine below 0");
      if (!c.ok) return c;
    }
  }
  return c;
}

/// With exponential patience the hazard-rate model is the density-at-zero
/// model: equal drift everywhere and equal FEM measures.
inline Check check_model2_exponential() {
  Check c;
  auto cfg = small_h2_config();
  cfg.model = msq::ModelKind::DensityAtZero;
  const auto m1 = msq::build_model(cfg.scenario, msq::ModelKind::DensityAtZero);
  const auto m2 = msq::build_model(cfg.scenario, msq::ModelKind::HazardRate);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> N01;
  for (int trial = 0; trial < 500; ++trial) {
    Eigen::VectorXd x(2);
    x << 5.0 * N01(rng), 5.0 * N01(rng);
    if ((m1.drift(x) - m2.drift(x)).norm() > 1e-12 * (1.0 + m1.drift(x).norm())) {
      c.fail("drifts differ");
      return c;
    }
  }
  const auto run1 = msq::run_model(cfg);
  cfg.model = msq::ModelKind::HazardRate;
  const auto run2 = msq::run_model(cfg);
  const auto a = run1.report.rows();
  const auto b = run2.report.rows();
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i].value - b[i].value));
  if (worst > 1e-9) c.fail("measures differ by " + std::to_string(worst));
  return c;
}

/// Every reference factor is continuous at 0 for every shipped recipe.
inline Check check_reference_continuity() {
  Check c;
  for (const char* name : {"example1_n50", "example1_n500", "example2_n50", "example3_erlang2_n50",
                           "example3_erlang3_n50_overloaded", "example4_n50", "example4_n500", "gi_m_n50",
                           "erlang_a_n50", "example1_n500_naive"}) {
    const auto cfg = msq::load_config(config_path(name));
    const auto r = msq::reference_for(cfg);
    for (int j = 0; j < r.dimension(); ++j) {
      const auto& f = r.factor(j);
      const double left = f.log_value(-1e-12);
      const double right = f.log_value(0.0);
      if (std::abs(left - right) > 1e-9 * (1.0 + std::abs(right))) {
        c.fail(std::string(name) + ": factor " + std::to_string(j) + " jumps at 0");
      }
    }
  }
  return c;
}

/// arrivals = departures + abandonments + in system per replication, and no
/// abandoning customer had patience above its wait.
inline Check check_flow_conservation() {
  Check c;
  auto cfg = msq::load_config(config_path("example3_erlang2_n50_overloaded"));
  cfg.simulation.replications = 4;
  cfg.simulation.horizon = 2000.0;
  cfg.simulation.threads = 1;
  const auto res = msq::simulate(msq::sim_spec_for(cfg));
  for (const auto& r : res.replications) {
    const auto& k = r.counters;
    if (k.arrivals != k.departures + k.abandonments + k.in_system) c.fail("flow not conserved");
    if (k.patience_violations != 0) c.fail("abandonment after the patience budget");
    if (k.abandonments == 0) c.fail("overloaded run produced no abandonments");
  }
  return c;
}

/// QBD pmf is nonnegative and sums to 1 with the geometric tail.
inline Check check_qbd_pmf() {
  Check c;
  auto cfg = msq::load_config(config_path("example1_n20"));
  cfg.qbd.cap_offset = 300;
  const auto res = msq::qbd_stationary(msq::qbd_spec_for(cfg), {20, 40});
  double s = res.tail_mass_above_cap;
  for (double p : res.pmf) {
    if (!(p >= 0.0)) c.fail("negative pmf entry");
    s += p;
  }
  if (std::abs(s - 1.0) > 1e-12) c.fail("pmf sums to " + std::to_string(s));
  return c;
}

}  // namespace msqtest
