// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "msq/error.hpp"
#include "msq/model.hpp"
#include "msq/patience.hpp"

namespace msq {

namespace detail {

/// integral_lo^hi exp(-a (z - m)^2) dz, avoiding erf cancellation in the tails.
inline double gaussian_integral(double a, double m, double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  const double s = std::sqrt(a);
  const double scale = 0.5 * std::sqrt(std::numbers::pi / a);
  const double u = s * (lo - m);
  const double v = s * (hi - m);
  if (u >= 0.0) return scale * (std::erfc(u) - std::erfc(v));
  if (v <= 0.0) return scale * (std::erfc(-v) - std::erfc(-u));
  return scale * (std::erf(v) - std::erf(u));
}

}  // namespace detail

/// One-dimensional reference factor, continuous at 0:
///   z < 0 : exp(-aL (z - mL)^2)
///   z >= 0: exp(-kR z - aL mL^2)                         (exponential right tail)
///        or exp(-aR (z - mR)^2 + aR mR^2 - aL mL^2)     (Gaussian right tail)
struct ReferenceFactor {
  enum class RightTail { Exponential, Gaussian };

  double left_rate = 1.0;
  double left_center = 0.0;
  RightTail right = RightTail::Gaussian;
  double right_rate = 1.0;
  double right_center = 0.0;

  [[nodiscard]] double log_value(double z) const {
    const double at_zero = -left_rate * left_center * left_center;
    if (z < 0.0) {
      const double u = z - left_center;
      return -left_rate * u * u;
    }
    if (right == RightTail::Exponential) return -right_rate * z + at_zero;
    const double u = z - right_center;
    return -right_rate * u * u + right_rate * right_center * right_center + at_zero;
  }

  [[nodiscard]] double operator()(double z) const { return std::exp(log_value(z)); }

  /// integral of the factor over [lo, hi]; infinite bounds allowed.
  [[nodiscard]] double mass(double lo, double hi) const {
    if (!(hi > lo)) return 0.0;
    double total = 0.0;
    if (lo < 0.0) total += detail::gaussian_integral(left_rate, left_center, lo, std::min(hi, 0.0));
    if (hi > 0.0) {
      const double a = std::max(lo, 0.0);
      const double at_zero = -left_rate * left_center * left_center;
      if (right == RightTail::Exponential) {
        const double ea = std::exp(-right_rate * a);
        const double eb = std::isinf(hi) ? 0.0 : std::exp(-right_rate * hi);
        total += std::exp(at_zero) * (ea - eb) / right_rate;
      } else {
        total += std::exp(right_rate * right_center * right_center + at_zero) *
                 detail::gaussian_integral(right_rate, right_center, a, hi);
      }
    }
    return total;
  }

  [[nodiscard]] double total_mass() const {
    constexpr double inf = std::numeric_limits<double>::infinity();
    return mass(-inf, inf);
  }
};

/// How the right branch was chosen; reported in diagnostics.
struct ReferenceRecipe {
  std::string rule;
  double alpha = 0.0;  ///< Gaussian right-tail rate parameter (0 for exponential tail)
  double q0 = 0.0;     ///< equilibrium scaled queue length used for the right center
  double beta = 0.0;   ///< beta used in the centers (adjusted when rho = 1)
};

/// Product density r(x) = prod_j r_j(x_j).
class ReferenceDensity {
 public:
  ReferenceDensity(std::vector<ReferenceFactor> factors, ReferenceRecipe recipe)
      : factors_(std::move(factors)), recipe_(std::move(recipe)) {
    for (const auto& f : factors_) {
      require(f.left_rate > 0.0 && f.right_rate > 0.0, "reference: factor rates must be > 0");
    }
  }

  [[nodiscard]] int dimension() const { return static_cast<int>(factors_.size()); }
  [[nodiscard]] const ReferenceFactor& factor(int j) const { return factors_[static_cast<std::size_t>(j)]; }
  [[nodiscard]] const ReferenceRecipe& recipe() const { return recipe_; }

  [[nodiscard]] double log_value(const double* x) const {
    double s = 0.0;
    for (std::size_t j = 0; j < factors_.size(); ++j) s += factors_[j].log_value(x[j]);
    return s;
  }
  [[nodiscard]] double operator()(const double* x) const { return std::exp(log_value(x)); }
  [[nodiscard]] double operator()(const std::vector<double>& x) const { return (*this)(x.data()); }

 private:
  std::vector<ReferenceFactor> factors_;
  ReferenceRecipe recipe_;
};

struct ReferenceOptions {
  /// Steep-hazard rule fires when l0 = 0 and |h'(0)|/h(0) > steepness_factor * lambda/sqrt(n).
  double steepness_factor = 1.0;
  /// Replaces h^(l0)(0) from the patience model.
  std::optional<double> hazard_derivative;
  /// Multiplies the exact h''(0) = theta^3 of Erlang-3 patience in the recipe.
  /// 8 gives the steeper reference under which the standard boxes hold epsilon0;
  /// the exact constant leaks about 1e-5 of reference mass out of [-7, 11]^2.
  double erlang3_scale = 8.0;
  /// Forces the auxiliary exponential queue with this rate, q0 from the balance equation.
  std::optional<double> auxiliary_rate;
};

/// Root q0 > 0 of lambda = n mu + sqrt(n) eta(q0). Bisection; bracket doubled.
inline double solve_balance_q0(const PatienceModel& pm, double n, double mu, double lambda) {
  const double target = (lambda - n * mu) / std::sqrt(n);
  require(target > 0.0, "reference: balance equation needs lambda > n mu");
  require(has_patience(pm), "reference: balance equation needs a patience distribution");
  auto f = [&](double q) { return eta(pm, q, n, lambda) - target; };
  double lo = 0.0;
  double hi = 1.0;
  while (f(hi) <= 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e8) throw InvalidInput("reference: abandonment cannot balance the overload (eta bounded)");
  }
  for (int it = 0; it < 400 && hi - lo > 1e-12 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

inline double solve_equilibrium_q0(const QueueScenario& sc) {
  return solve_balance_q0(sc.patience, sc.n, sc.constants.mu, sc.lambda);
}

/// Taylor shortcut: q0 = n^{-1/2} (lambda^l0 (l0+1)! (lambda - n mu) / h^(l0)(0))^{1/(l0+1)}.
inline double taylor_equilibrium_q0(double n, double mu, double lambda, int order, double derivative) {
  require(derivative > 0.0, "reference: lowest nonzero hazard derivative must be > 0 when overloaded");
  const double excess = lambda - n * mu;
  require(excess >= 0.0, "reference: Taylor equilibrium needs lambda >= n mu");
  const double fact = std::tgamma(order + 2.0);
  return std::pow(std::pow(lambda, order) * fact * excess / derivative, 1.0 / (order + 1)) / std::sqrt(n);
}

/// alpha = n^{l0/2} h^(l0)(0) q0^l0 / (lambda^l0 (l0+1)!).
inline double surrogate_abandonment_rate(double n, double lambda, int order, double derivative, double q0) {
  return std::pow(n, 0.5 * order) * derivative * std::pow(q0, order) /
         (std::pow(lambda, order) * std::tgamma(order + 2.0));
}

namespace detail {

inline ReferenceDensity assemble_reference(const QueueScenario& sc, double beta, bool exponential_right,
                                           double alpha, double q0, std::string rule) {
  const int d = sc.dimension();
  const double mu = sc.constants.mu;
  const double spread = sc.ca2 + sc.constants.cs2;
  std::vector<ReferenceFactor> factors(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) {
    auto& f = factors[static_cast<std::size_t>(j)];
    f.left_rate = 1.0 / (1.0 + sc.ca2);
    f.left_center = -sc.constants.gamma(j) * beta;
    if (exponential_right) {
      f.right = ReferenceFactor::RightTail::Exponential;
      f.right_rate = 2.0 * beta / spread;
    } else {
      f.right = ReferenceFactor::RightTail::Gaussian;
      f.right_rate = alpha / (mu * spread);
      f.right_center = sc.service.p(j) * q0;
    }
  }
  ReferenceRecipe recipe{std::move(rule), exponential_right ? 0.0 : alpha, q0, beta};
  return ReferenceDensity(std::move(factors), std::move(recipe));
}

}  // namespace detail

inline ReferenceDensity build_reference(const QueueScenario& sc, ModelKind kind, const ReferenceOptions& opt = {}) {
  require(sc.rho > 0.0, "reference: rho must be > 0");
  const double n = sc.n;
  const double mu = sc.constants.mu;
  if (kind == ModelKind::DensityAtZero) {
    const double alpha = density_at_zero(sc.patience);
    if (alpha == 0.0) {
      require(sc.rho < 1.0, "reference: no abandonment requires rho < 1");
      return detail::assemble_reference(sc, sc.beta, true, 0.0, 0.0, "no-abandonment");
    }
    return detail::assemble_reference(sc, sc.beta, false, alpha, -mu * sc.beta / alpha, "density-at-zero");
  }

  require(has_patience(sc.patience), "reference: hazard-rate model requires a patience distribution");
  if (sc.rho < 1.0) return detail::assemble_reference(sc, sc.beta, true, 0.0, 0.0, "auxiliary no-abandonment");

  if (opt.auxiliary_rate) {
    require(*opt.auxiliary_rate > 0.0, "reference: auxiliary rate must be > 0");
    const double q0 = sc.rho > 1.0 ? solve_equilibrium_q0(sc) : 0.0;
    return detail::assemble_reference(sc, sc.beta, false, *opt.auxiliary_rate, q0, "auxiliary exponential (override)");
  }

  auto order = lowest_nonzero_hazard_order(sc.patience);
  if (!order) throw InvalidInput("reference: patience has no nonzero hazard derivative at 0");
  if (opt.hazard_derivative) {
    order->derivative = *opt.hazard_derivative;
  } else if (const auto* e = std::get_if<ErlangPatience>(&sc.patience); e && e->k == 3) {
    order->derivative *= opt.erlang3_scale;
  }

  double lambda = sc.lambda;
  double beta = sc.beta;
  std::string rule = "hazard Taylor";
  if (order->order > 0 && sc.rho == 1.0) {
    lambda = n * mu * (1.0 + 1.0 / std::sqrt(n));
    beta = -1.0;
    rule += " (adjusted rho)";
  }

  if (order->order == 0) {
    const double h0 = order->derivative;
    const double slope = std::abs(hazard_slope_at_zero(sc.patience));
    if (slope / h0 > opt.steepness_factor * sc.lambda / std::sqrt(n)) {
      const double a = hazard_infimum(sc.patience);
      const double q0 = sc.rho > 1.0 ? solve_equilibrium_q0(sc) : 0.0;
      return detail::assemble_reference(sc, sc.beta, false, a, q0, "auxiliary exponential (steep hazard)");
    }
  }

  const double q0 = taylor_equilibrium_q0(n, mu, lambda, order->order, order->derivative);
  const double alpha = surrogate_abandonment_rate(n, lambda, order->order, order->derivative, q0);
  require(alpha > 0.0, "reference: surrogate abandonment rate vanished");
  return detail::assemble_reference(sc, beta, false, alpha, q0, rule);
}

/// Per dimension: the closed-form one-dimensional density of an exponential-
/// service queue (cs2 = 1), ignoring phase loads. Fails on heavy-tailed service.
inline ReferenceDensity naive_reference(const QueueScenario& sc) {
  const double alpha = density_at_zero(sc.patience);
  require(alpha > 0.0, "reference: naive density needs a positive patience density at 0");
  const double mu = sc.constants.mu;
  std::vector<ReferenceFactor> factors(static_cast<std::size_t>(sc.dimension()));
  for (auto& f : factors) {
    f.left_rate = 1.0 / (1.0 + sc.ca2);
    f.left_center = -sc.beta;
    f.right = ReferenceFactor::RightTail::Gaussian;
    f.right_rate = alpha / (mu * (1.0 + sc.ca2));
    f.right_center = -mu * sc.beta / alpha;
  }
  return ReferenceDensity(std::move(factors), {"naive exponential-service", alpha, -mu * sc.beta / alpha, sc.beta});
}

/// Hypercube prod_j [lower_j, upper_j].
struct TruncationBox {
  std::vector<double> lower;
  std::vector<double> upper;
  double epsilon0 = 0.0;

  [[nodiscard]] int dimension() const { return static_cast<int>(lower.size()); }
  [[nodiscard]] bool contains(const TruncationBox& other) const {
    for (std::size_t j = 0; j < lower.size(); ++j) {
      if (lower[j] > other.lower[j] || upper[j] < other.upper[j]) return false;
    }
    return true;
  }
  static TruncationBox cube(int d, double lo, double hi) {
    return {std::vector<double>(static_cast<std::size_t>(d), lo), std::vector<double>(static_cast<std::size_t>(d), hi),
            0.0};
  }
};

/// Integral of r over R^d minus the box, r unnormalized as built.
inline double excluded_mass(const ReferenceDensity& r, const TruncationBox& box) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  double total = 1.0;
  double inside = 1.0;
  for (int j = 0; j < r.dimension(); ++j) {
    const auto k = static_cast<std::size_t>(j);
    total *= r.factor(j).total_mass();
    inside *= r.factor(j).mass(box.lower[k], box.upper[k]);
  }
  return std::max(0.0, total - inside);
}

/// Hypercube [l, u]^d with edges on multiples of `grid`. u is the smallest
/// edge with the integral of r over {max_j x_j > u} below epsilon0, and l the
/// largest edge with the integral over {min_j x_j < l} below epsilon0, capped
/// at `max_lower`. The left branch of r is a heuristic for the left tail, and
/// the solution is still sensitive to l when that tail mass is 1e-9.
inline TruncationBox choose_truncation_box(const ReferenceDensity& r, double epsilon0, double grid = 1.0,
                                           double max_lower = -7.0) {
  require(epsilon0 > 0.0 && epsilon0 < 1.0, "box: epsilon0 must lie in (0, 1)");
  require(grid > 0.0, "box: grid must be > 0");
  constexpr double inf = std::numeric_limits<double>::infinity();
  const int d = r.dimension();
  // mass of r with at least one coordinate in (a, b), the complementary slab taken from each factor
  auto some_in = [&](double a, double b) {
    double total = 1.0;
    double none = 1.0;
    for (int j = 0; j < d; ++j) {
      const auto& f = r.factor(j);
      total *= f.total_mass();
      none *= f.total_mass() - f.mass(a, b);
    }
    return std::max(0.0, total - none);
  };
  int hi = 0;
  while (some_in(hi * grid, inf) >= epsilon0) ++hi;
  int lo = 0;
  while (some_in(-inf, lo * grid) >= epsilon0) --lo;
  const double lower = std::min(lo * grid, std::floor(max_lower / grid) * grid);
  TruncationBox box = TruncationBox::cube(d, lower, hi * grid);
  box.epsilon0 = epsilon0;
  return box;
}

}  // namespace msq
