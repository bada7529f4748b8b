// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "msq/error.hpp"
#include "msq/hermite.hpp"
#include "msq/mesh.hpp"
#include "msq/model.hpp"
#include "msq/quadrature.hpp"
#include "msq/refdensity.hpp"

namespace msq {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

struct AssemblyOptions {
  int quadrature_order = 8;
  unsigned threads = 0;  ///< 0 = hardware concurrency
};

/// A_il = <Gf_i, Gf_l>_r and v_i = <Gf_i, 1>_r on K; only the lower triangle
/// of A is stored.
struct LinearSystem {
  SparseMatrix A;
  Eigen::VectorXd v;
  double reference_mass = 0.0;  ///< integral of r over K, same rule as A
  int quadrature_order = 0;
  double seconds = 0.0;
};

namespace detail {

inline unsigned worker_count(unsigned requested, std::size_t jobs) {
  unsigned t = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::size_t>(t, std::max<std::size_t>(jobs, 1)));
}

/// Runs body(begin, end) over contiguous chunks of [0, count) on worker threads.
template <class Body>
void parallel_chunks(std::size_t count, unsigned threads, Body body) {
  const unsigned workers = worker_count(threads, count);
  if (workers <= 1) {
    body(std::size_t{0}, count);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (count + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t b = w * chunk;
    const std::size_t e = std::min(count, b + chunk);
    if (b >= e) break;
    pool.emplace_back([=, &body] { body(b, e); });
  }
  for (auto& th : pool) th.join();
}

/// Evaluates x and Gf_a(x) for every local function a of an element at local
/// coordinates t.
template <int Dim>
void local_generator(const DiffusionModel& dm, const LatticeMesh<Dim>& mesh, const std::array<int, Dim>& elem,
                     const std::array<double, Dim>& t, double* x, double* gf) {
  constexpr int kLocal = LatticeMesh<Dim>::kLocal;
  std::array<std::array<Shape1D, 4>, Dim> s;
  for (int j = 0; j < Dim; ++j) {
    const double h = mesh.width(j, elem[j]);
    x[j] = mesh.points(j)[elem[j]] + t[j] * h;
    for (int c = 0; c < 4; ++c) s[j][c] = hermite_shape(c, t[j], h);
  }
  std::array<double, Dim> b;
  dm.drift(x, b.data());
  const auto& S = dm.covariance();
  for (int a = 0; a < kLocal; ++a) {
    std::array<const Shape1D*, Dim> f;
    for (int j = 0; j < Dim; ++j) f[j] = &s[j][(a >> (2 * j)) & 3];
    double total = 0.0;
    for (int m = 0; m < Dim; ++m) {
      double g = f[m]->d1;
      double hmm = f[m]->d2;
      for (int j = 0; j < Dim; ++j) {
        if (j == m) continue;
        g *= f[j]->value;
        hmm *= f[j]->value;
      }
      total += b[m] * g + 0.5 * S(m, m) * hmm;
      for (int l = m + 1; l < Dim; ++l) {
        double hml = f[m]->d1 * f[l]->d1;
        for (int j = 0; j < Dim; ++j) {
          if (j != m && j != l) hml *= f[j]->value;
        }
        total += S(m, l) * hml;  // symmetric pair counted once with factor 2 * 1/2
      }
    }
    gf[a] = total;
  }
}

template <int Dim>
struct QuadratureGrid {
  std::vector<std::array<double, Dim>> t;
  std::vector<double> w;  ///< product weights on the unit cell
};

template <int Dim>
QuadratureGrid<Dim> tensor_grid(const GaussRule& rule) {
  QuadratureGrid<Dim> g;
  const int q = rule.order();
  std::size_t total = 1;
  for (int j = 0; j < Dim; ++j) total *= static_cast<std::size_t>(q);
  for (std::size_t k = 0; k < total; ++k) {
    std::array<double, Dim> t{};
    double w = 1.0;
    std::size_t r = k;
    for (int j = 0; j < Dim; ++j) {
      const auto i = r % static_cast<std::size_t>(q);
      r /= static_cast<std::size_t>(q);
      t[j] = rule.nodes[i];
      w *= rule.weights[i];
    }
    g.t.push_back(t);
    g.w.push_back(w);
  }
  return g;
}

template <int Dim>
double element_volume(const LatticeMesh<Dim>& mesh, const std::array<int, Dim>& elem) {
  double v = 1.0;
  for (int j = 0; j < Dim; ++j) v *= mesh.width(j, elem[j]);
  return v;
}

}  // namespace detail

template <int Dim>
LinearSystem assemble(const DiffusionModel& dm, const ReferenceDensity& r, const LatticeMesh<Dim>& mesh,
                      const AssemblyOptions& opt = {}) {
  require(opt.quadrature_order >= 1, "assemble: quadrature order must be >= 1");
  require(dm.dimension() == Dim && r.dimension() == Dim, "assemble: dimension mismatch");
  const auto start = std::chrono::steady_clock::now();
  constexpr int kLocal = LatticeMesh<Dim>::kLocal;
  constexpr int kPacked = kLocal * (kLocal + 1) / 2;
  const auto grid = detail::tensor_grid<Dim>(gauss_legendre(opt.quadrature_order));
  const std::size_t elements = mesh.element_count();

  // per element: packed lower triangle of the local matrix, local v, local mass
  constexpr int kStride = kPacked + kLocal + 1;
  std::vector<double> local(elements * kStride, 0.0);

  detail::parallel_chunks(elements, opt.threads, [&](std::size_t begin, std::size_t end) {
    std::array<double, Dim> x{};
    std::array<double, kLocal> gf{};
    for (std::size_t e = begin; e < end; ++e) {
      const auto elem = mesh.element_coords(e);
      const double vol = detail::element_volume<Dim>(mesh, elem);
      double* out = &local[e * kStride];
      for (std::size_t k = 0; k < grid.w.size(); ++k) {
        detail::local_generator<Dim>(dm, mesh, elem, grid.t[k], x.data(), gf.data());
        const double wr = grid.w[k] * vol * r(x.data());
        int idx = 0;
        for (int a = 0; a < kLocal; ++a) {
          const double ga = wr * gf[a];
          for (int b = 0; b <= a; ++b) out[idx++] += ga * gf[b];
        }
        for (int a = 0; a < kLocal; ++a) out[kPacked + a] += wr * gf[a];
        out[kPacked + kLocal] += wr;
      }
    }
  });

  const auto m = static_cast<Eigen::Index>(mesh.basis_count());
  LinearSystem sys;
  sys.quadrature_order = opt.quadrature_order;
  sys.v = Eigen::VectorXd::Zero(m);
  std::vector<Eigen::Triplet<double, int>> trips;
  trips.reserve(elements * kPacked);
  for (std::size_t e = 0; e < elements; ++e) {
    const auto idx = mesh.local_indices(mesh.element_coords(e));
    const double* in = &local[e * kStride];
    int k = 0;
    for (int a = 0; a < kLocal; ++a) {
      for (int b = 0; b <= a; ++b, ++k) {
        if (idx[a] < 0 || idx[b] < 0) continue;
        const auto i = static_cast<int>(std::max(idx[a], idx[b]));
        const auto j = static_cast<int>(std::min(idx[a], idx[b]));
        trips.emplace_back(i, j, in[k]);
      }
    }
    for (int a = 0; a < kLocal; ++a) {
      if (idx[a] >= 0) sys.v(idx[a]) += in[kPacked + a];
    }
    sys.reference_mass += in[kPacked + kLocal];
  }
  sys.A.resize(m, m);
  sys.A.setFromTriplets(trips.begin(), trips.end());
  sys.A.makeCompressed();
  sys.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return sys;
}

struct SolveOptions {
  bool refine = true;
  bool estimate_condition = true;
  /// Also integrates (1 - cbar)^2 r directly and records it.
  bool cross_check_norm = false;
  unsigned threads = 0;
  double negative_mass_warning = 1e-4;
  /// Above this 1-norm condition estimate the reference density is flagged.
  double condition_limit = 1e100;
};

struct SolveDiagnostics {
  std::size_t unknowns = 0;
  double residual = 0.0;               ///< ||Au - v||_inf / ||v||_inf
  double condition_estimate = 0.0;     ///< 1-norm estimate for A
  double scaled_condition_estimate = 0.0;  ///< same for D^{-1/2} A D^{-1/2}
  bool suspect_reference = false;         ///< condition estimate above SolveOptions::condition_limit
  int nonpositive_pivots = 0;
  double norm_sq = 0.0;                ///< ||c - cbar||^2
  double direct_norm_sq = 0.0;         ///< quadrature cross-check, when requested
  double negative_mass = 0.0;          ///< integral of g^- over K
  double normalization = 0.0;          ///< integral of g over K
  double assembly_seconds = 0.0;
  double solve_seconds = 0.0;
  std::vector<std::string> warnings;
};

namespace detail {

inline double one_norm_symmetric(const SparseMatrix& lower) {
  Eigen::VectorXd col = Eigen::VectorXd::Zero(lower.rows());
  for (int k = 0; k < lower.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(lower, k); it; ++it) {
      col(it.col()) += std::abs(it.value());
      if (it.row() != it.col()) col(it.row()) += std::abs(it.value());
    }
  }
  return col.size() ? col.maxCoeff() : 0.0;
}

/// Hager's estimator with Higham's extra test vector for ||B^{-1}||_1,
/// B symmetric, given a solver for B.
template <class Solve>
double inverse_one_norm_estimate(Eigen::Index n, Solve solve) {
  if (n == 0) return 0.0;
  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  double est = 0.0;
  Eigen::Index last = -1;
  for (int it = 0; it < 5; ++it) {
    const Eigen::VectorXd y = solve(x);
    const double norm = y.lpNorm<1>();
    if (it > 0 && norm <= est) break;
    est = norm;
    const Eigen::VectorXd xi = y.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
    const Eigen::VectorXd z = solve(xi);
    Eigen::Index j = 0;
    z.cwiseAbs().maxCoeff(&j);
    if (it > 0 && (j == last || std::abs(z(j)) <= z.dot(x))) break;
    x.setZero();
    x(j) = 1.0;
    last = j;
  }
  Eigen::VectorXd alt(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    alt(i) = (i % 2 ? -1.0 : 1.0) * (1.0 + static_cast<double>(i) / std::max<double>(1.0, static_cast<double>(n - 1)));
  }
  const Eigen::VectorXd y_alt = solve(alt);
  const double alt_est = 2.0 * y_alt.lpNorm<1>() / (3.0 * static_cast<double>(n));
  return std::max(est, alt_est);
}

}  // namespace detail

/// Projection cbar = sum u_i Gf_i of the constant 1 onto span{Gf_i} in L2(r),
/// ratio q = (1 - cbar)/||1 - cbar||^2 and density g = r q.
template <int Dim>
class SolutionField {
 public:
  SolutionField(DiffusionModel model, ReferenceDensity reference, LatticeMesh<Dim> mesh, Eigen::VectorXd u,
                SolveDiagnostics diagnostics, int quadrature_order)
      : model_(std::move(model)),
        reference_(std::move(reference)),
        mesh_(std::move(mesh)),
        u_(std::move(u)),
        diag_(std::move(diagnostics)),
        order_(quadrature_order) {}

  [[nodiscard]] const DiffusionModel& model() const { return model_; }
  [[nodiscard]] const ReferenceDensity& reference() const { return reference_; }
  [[nodiscard]] const LatticeMesh<Dim>& mesh() const { return mesh_; }
  [[nodiscard]] const Eigen::VectorXd& coefficients() const { return u_; }
  [[nodiscard]] const SolveDiagnostics& diagnostics() const { return diag_; }
  [[nodiscard]] SolveDiagnostics& diagnostics() { return diag_; }
  [[nodiscard]] double norm_sq() const { return diag_.norm_sq; }
  [[nodiscard]] int quadrature_order() const { return order_; }

  /// cbar at local coordinates of an element; also returns x.
  double projection_at(const std::array<int, Dim>& elem, const std::array<double, Dim>& t, double* x) const {
    std::array<double, LatticeMesh<Dim>::kLocal> gf{};
    detail::local_generator<Dim>(model_, mesh_, elem, t, x, gf.data());
    const auto idx = mesh_.local_indices(elem);
    double c = 0.0;
    for (int a = 0; a < LatticeMesh<Dim>::kLocal; ++a) {
      if (idx[a] >= 0) c += u_(idx[a]) * gf[a];
    }
    return c;
  }

  /// 0 outside K.
  [[nodiscard]] double projection(const double* x) const {
    if (!mesh_.inside(x)) return 0.0;
    std::array<int, Dim> elem{};
    std::array<double, Dim> t{};
    mesh_.locate(x, elem, t);
    std::array<double, Dim> y{};
    return projection_at(elem, t, y.data());
  }

  [[nodiscard]] double ratio(const double* x) const {
    if (!mesh_.inside(x)) return 0.0;
    return (1.0 - projection(x)) / diag_.norm_sq;
  }

  [[nodiscard]] double density(const double* x) const {
    if (!mesh_.inside(x)) return 0.0;
    return reference_(x) * ratio(x);
  }

  [[nodiscard]] double density(const std::array<double, Dim>& x) const { return density(x.data()); }

  /// For each element, select(lo, hi) returns the Gauss order to use (0 skips);
  /// visit(x, g(x), weight) is called at every point. Single-threaded.
  template <class Select, class Visit>
  void for_each_point(Select select, Visit visit) const {
    std::vector<int> cached_order;
    detail::QuadratureGrid<Dim> grid;
    std::array<double, Dim> lo{};
    std::array<double, Dim> hi{};
    std::array<double, Dim> x{};
    for (std::size_t e = 0; e < mesh_.element_count(); ++e) {
      const auto elem = mesh_.element_coords(e);
      for (int j = 0; j < Dim; ++j) {
        lo[j] = mesh_.points(j)[elem[j]];
        hi[j] = mesh_.points(j)[elem[j] + 1];
      }
      const int q = select(lo, hi);
      if (q <= 0) continue;
      if (cached_order.empty() || cached_order.front() != q) {
        grid = detail::tensor_grid<Dim>(gauss_legendre(q));
        cached_order.assign(1, q);
      }
      const double vol = detail::element_volume<Dim>(mesh_, elem);
      for (std::size_t k = 0; k < grid.w.size(); ++k) {
        const double c = projection_at(elem, grid.t[k], x.data());
        const double g = reference_(x.data()) * (1.0 - c) / diag_.norm_sq;
        visit(x, g, grid.w[k] * vol);
      }
    }
  }

  /// Visits points of a rule for the part of K where side * (e'x - z) > 0.
  /// Elements inside the half-space use `smooth` points per axis. Cut elements
  /// get `cut` points per axis: with CutRule::Indicator the tensor rule on the
  /// whole element is weighted by the indicator (points on the hyperplane are
  /// dropped), with CutRule::Split the element is split along the hyperplane,
  /// which is exact for the indicator when Dim <= 2. Split falls back to
  /// Indicator for Dim > 2.
  template <class Visit>
  void for_each_halfspace_point(double z, int side, int smooth, int cut, CutRule rule, Visit visit) const {
    require(side == 1 || side == -1, "fem: half-space side must be +1 or -1");
    const detail::QuadratureGrid<Dim> smooth_grid = detail::tensor_grid<Dim>(gauss_legendre(smooth));
    const GaussRule cut_rule = gauss_legendre(cut);
    const bool split = rule == CutRule::Split && Dim <= 2;
    detail::QuadratureGrid<Dim> cut_grid;
    if (!split) cut_grid = detail::tensor_grid<Dim>(cut_rule);
    std::array<double, Dim> lo{};
    std::array<double, Dim> hi{};
    std::array<double, Dim> x{};
    std::array<double, Dim> t{};
    auto emit = [&](const std::array<int, Dim>& elem, double w) {
      const double c = projection_at(elem, t, x.data());
      visit(x, reference_(x.data()) * (1.0 - c) / diag_.norm_sq, w);
    };
    for (std::size_t e = 0; e < mesh_.element_count(); ++e) {
      const auto elem = mesh_.element_coords(e);
      double a = 0.0;
      double b = 0.0;
      for (int j = 0; j < Dim; ++j) {
        lo[j] = mesh_.points(j)[elem[j]];
        hi[j] = mesh_.points(j)[elem[j] + 1];
        a += lo[j];
        b += hi[j];
      }
      const bool inside = side > 0 ? a >= z : b <= z;
      const bool outside = side > 0 ? b <= z : a >= z;
      if (outside) continue;
      if (inside) {
        const double vol = detail::element_volume<Dim>(mesh_, elem);
        for (std::size_t k = 0; k < smooth_grid.w.size(); ++k) {
          t = smooth_grid.t[k];
          emit(elem, smooth_grid.w[k] * vol);
        }
        continue;
      }
      if (!split) {
        const double vol = detail::element_volume<Dim>(mesh_, elem);
        for (std::size_t k = 0; k < cut_grid.w.size(); ++k) {
          t = cut_grid.t[k];
          double s = 0.0;
          for (int j = 0; j < Dim; ++j) s += lo[j] + t[j] * (hi[j] - lo[j]);
          if (side * (s - z) > 0.0) emit(elem, cut_grid.w[k] * vol);
        }
      } else if constexpr (Dim == 1) {
        const double u0 = side > 0 ? z : lo[0];
        const double u1 = side > 0 ? hi[0] : z;
        for (int i = 0; i < cut_rule.order(); ++i) {
          const double xi = u0 + (u1 - u0) * cut_rule.nodes[static_cast<std::size_t>(i)];
          t[0] = (xi - lo[0]) / (hi[0] - lo[0]);
          emit(elem, (u1 - u0) * cut_rule.weights[static_cast<std::size_t>(i)]);
        }
      } else if constexpr (Dim == 2) {
        // x2 limits are linear in x1 between the breakpoints z - hi2 and z - lo2.
        std::array<double, 4> br{lo[0], hi[0], lo[0], hi[0]};
        std::size_t nb = 2;
        for (double v : {z - hi[1], z - lo[1]}) {
          if (v > lo[0] && v < hi[0]) br[nb++] = v;
        }
        std::sort(br.begin(), br.begin() + static_cast<std::ptrdiff_t>(nb));
        for (std::size_t s = 0; s + 1 < nb; ++s) {
          const double u0 = br[s];
          const double u1 = br[s + 1];
          if (!(u1 > u0)) continue;
          for (int i = 0; i < cut_rule.order(); ++i) {
            const double x1 = u0 + (u1 - u0) * cut_rule.nodes[static_cast<std::size_t>(i)];
            const double c0 = side > 0 ? std::max(lo[1], z - x1) : lo[1];
            const double c1 = side > 0 ? hi[1] : std::min(hi[1], z - x1);
            if (!(c1 > c0)) continue;
            const double w1 = (u1 - u0) * cut_rule.weights[static_cast<std::size_t>(i)];
            t[0] = (x1 - lo[0]) / (hi[0] - lo[0]);
            for (int k = 0; k < cut_rule.order(); ++k) {
              const double x2 = c0 + (c1 - c0) * cut_rule.nodes[static_cast<std::size_t>(k)];
              t[1] = (x2 - lo[1]) / (hi[1] - lo[1]);
              emit(elem, w1 * (c1 - c0) * cut_rule.weights[static_cast<std::size_t>(k)]);
            }
          }
        }
      }
    }
  }

 private:
  DiffusionModel model_;
  ReferenceDensity reference_;
  LatticeMesh<Dim> mesh_;
  Eigen::VectorXd u_;
  SolveDiagnostics diag_;
  int order_;
};

/// Solves A u = v by a symmetrically scaled sparse LDL' factorization with one
/// refinement step and builds the field. Throws NumericalFailure when
/// ||c - cbar||^2 <= 0.
template <int Dim>
SolutionField<Dim> solve_field(const LinearSystem& sys, const DiffusionModel& dm, const ReferenceDensity& r,
                               const LatticeMesh<Dim>& mesh, const SolveOptions& opt = {}) {
  const auto start = std::chrono::steady_clock::now();
  const Eigen::Index m = sys.A.rows();
  require(m == static_cast<Eigen::Index>(mesh.basis_count()), "solve: system size does not match mesh");
  require(m > 0, "solve: mesh has no interior basis functions");
  SolveDiagnostics diag;
  diag.unknowns = static_cast<std::size_t>(m);
  diag.assembly_seconds = sys.seconds;

  Eigen::VectorXd dinv(m);
  {
    const Eigen::VectorXd dA = sys.A.diagonal();
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!(dA(i) > 0.0)) throw NumericalFailure("solve: A has a nonpositive diagonal entry");
      dinv(i) = 1.0 / std::sqrt(dA(i));
    }
  }
  SparseMatrix S = dinv.asDiagonal() * sys.A * dinv.asDiagonal();
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
  ldlt.compute(S);
  if (ldlt.info() != Eigen::Success) throw NumericalFailure("solve: sparse factorization failed");
  for (Eigen::Index i = 0; i < ldlt.vectorD().size(); ++i) {
    if (!(ldlt.vectorD()(i) > 0.0)) ++diag.nonpositive_pivots;
  }
  auto solve_raw = [&](const Eigen::VectorXd& rhs) -> Eigen::VectorXd {
    Eigen::VectorXd y = ldlt.solve(dinv.cwiseProduct(rhs));
    return dinv.cwiseProduct(y);
  };
  const auto Afull = sys.A.selfadjointView<Eigen::Lower>();

  Eigen::VectorXd u = solve_raw(sys.v);
  if (opt.refine) {
    const Eigen::VectorXd res = sys.v - Afull * u;
    u += solve_raw(res);
  }
  const Eigen::VectorXd res = Afull * u - sys.v;
  const double vmax = sys.v.cwiseAbs().maxCoeff();
  diag.residual = vmax > 0.0 ? res.cwiseAbs().maxCoeff() / vmax : res.cwiseAbs().maxCoeff();

  if (opt.estimate_condition) {
    diag.condition_estimate = detail::one_norm_symmetric(sys.A) *
                              detail::inverse_one_norm_estimate(m, [&](const Eigen::VectorXd& y) { return solve_raw(y); });
    diag.scaled_condition_estimate =
        detail::one_norm_symmetric(S) *
        detail::inverse_one_norm_estimate(m, [&](const Eigen::VectorXd& y) -> Eigen::VectorXd { return ldlt.solve(y); });
  }

  diag.norm_sq = sys.reference_mass - sys.v.dot(u);
  diag.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!(diag.norm_sq > 0.0)) {
    throw NumericalFailure("solve: ||c - cbar||^2 = " + std::to_string(diag.norm_sq) +
                           " is not positive; the reference density is suspect (condition estimate " +
                           std::to_string(diag.condition_estimate) + ")");
  }

  SolutionField<Dim> field(dm, r, mesh, std::move(u), std::move(diag), sys.quadrature_order);
  double negative = 0.0;
  double total = 0.0;
  double direct = 0.0;
  const int q = sys.quadrature_order;
  field.for_each_point([q](const auto&, const auto&) { return q; },
                       [&](const std::array<double, Dim>& x, double g, double w) {
                         total += w * g;
                         if (g < 0.0) negative -= w * g;
                         if (opt.cross_check_norm) {
                           const double ns = field.norm_sq();
                           const double rx = r(x.data());
                           const double one_minus_c = g * ns / rx;
                           direct += w * rx * one_minus_c * one_minus_c;
                         }
                       });
  auto& d = field.diagnostics();
  d.negative_mass = negative;
  d.normalization = total;
  d.direct_norm_sq = direct;
  if (negative > opt.negative_mass_warning) {
    d.warnings.push_back("negative density mass " + std::to_string(negative) + " exceeds " +
                         std::to_string(opt.negative_mass_warning));
  }
  if (d.condition_estimate > opt.condition_limit) {
    d.suspect_reference = true;
    std::ostringstream msg;
    msg << "condition estimate " << d.condition_estimate << " exceeds " << opt.condition_limit
        << "; A is numerically singular and the reference density is suspect";
    d.warnings.push_back(msg.str());
  }
  if (d.nonpositive_pivots > 0) {
    d.warnings.push_back(std::to_string(d.nonpositive_pivots) + " nonpositive pivots in the scaled factorization");
  }
  return field;
}

}  // namespace msq
