// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "msq/error.hpp"
#include "msq/patience.hpp"
#include "msq/phasetype.hpp"

namespace msq {

struct PoissonArrivals {};

/// Erlang-k interarrival times with mean 1/lambda.
struct ErlangArrivals {
  int k = 1;
};

/// Hyperexponential interarrival shape; rates are rescaled so the mean is
/// 1/lambda, leaving only the shape (and so ca2) meaningful.
struct HyperexponentialArrivals {
  std::vector<double> p;
  std::vector<double> rate;
};

using ArrivalProcess = std::variant<PoissonArrivals, ErlangArrivals, HyperexponentialArrivals>;

inline void validate(const ArrivalProcess& a) {
  std::visit(detail::overloaded{
                 [](const PoissonArrivals&) {},
                 [](const ErlangArrivals& e) { require(e.k >= 1, "arrivals: Erlang k must be >= 1"); },
                 [](const HyperexponentialArrivals& h) {
                   require(!h.p.empty() && h.p.size() == h.rate.size(),
                           "arrivals: hyperexponential p and rates must have equal nonzero length");
                   double s = 0.0;
                   for (std::size_t i = 0; i < h.p.size(); ++i) {
                     require(h.p[i] >= 0.0 && h.rate[i] > 0.0, "arrivals: invalid hyperexponential parameters");
                     s += h.p[i];
                   }
                   require(std::abs(s - 1.0) <= 1e-12, "arrivals: hyperexponential p must sum to 1");
                 },
             },
             a);
}

/// Squared coefficient of variation of an interarrival time.
inline double arrival_scv(const ArrivalProcess& a) {
  return std::visit(detail::overloaded{
                        [](const PoissonArrivals&) { return 1.0; },
                        [](const ErlangArrivals& e) { return 1.0 / e.k; },
                        [](const HyperexponentialArrivals& h) {
                          double m1 = 0.0;
                          double m2 = 0.0;
                          for (std::size_t i = 0; i < h.p.size(); ++i) {
                            m1 += h.p[i] / h.rate[i];
                            m2 += 2.0 * h.p[i] / (h.rate[i] * h.rate[i]);
                          }
                          return m2 / (m1 * m1) - 1.0;
                        },
                    },
                    a);
}

/// Interarrival sampler at rate lambda. One instance per RNG stream.
class InterarrivalSampler {
 public:
  InterarrivalSampler(const ArrivalProcess& a, double lambda) : process_(a), lambda_(lambda) {
    if (const auto* h = std::get_if<HyperexponentialArrivals>(&a)) {
      double m1 = 0.0;
      for (std::size_t i = 0; i < h->p.size(); ++i) m1 += h->p[i] / h->rate[i];
      for (double r : h->rate) scaled_rates_.push_back(r * m1 * lambda);
      branch_ = std::discrete_distribution<int>(h->p.begin(), h->p.end());
    }
  }

  template <class Rng>
  double operator()(Rng& rng) {
    if (lambda_ <= 0.0) return std::numeric_limits<double>::infinity();
    return std::visit(detail::overloaded{
                          [&](const PoissonArrivals&) { return std::exponential_distribution<double>(lambda_)(rng); },
                          [&](const ErlangArrivals& e) {
                            return std::gamma_distribution<double>(e.k, 1.0 / (e.k * lambda_))(rng);
                          },
                          [&](const HyperexponentialArrivals&) {
                            const int i = branch_(rng);
                            return std::exponential_distribution<double>(scaled_rates_[static_cast<std::size_t>(i)])(rng);
                          },
                      },
                      process_);
  }

 private:
  ArrivalProcess process_;
  double lambda_;
  std::vector<double> scaled_rates_;
  std::discrete_distribution<int> branch_;
};

/// GI/Ph/n+GI primitives with derived constants.
struct QueueScenario {
  int n = 1;
  double lambda = 0.0;
  ArrivalProcess arrivals = PoissonArrivals{};
  PhaseTypeDistribution service;
  PatienceModel patience = NoPatience{};

  ServiceConstants constants;
  double ca2 = 1.0;
  double rho = 0.0;
  double beta = 0.0;

  [[nodiscard]] int dimension() const { return service.phases(); }

  /// lambda = 0 is accepted for simulation; diffusion builders require rho > 0.
  static QueueScenario make(int n, double lambda, ArrivalProcess arrivals, PhaseTypeDistribution service,
                            PatienceModel patience) {
    require(n >= 1, "scenario: n must be >= 1");
    require(std::isfinite(lambda) && lambda >= 0.0, "scenario: lambda must be >= 0");
    validate(arrivals);
    validate(patience);
    QueueScenario sc;
    sc.n = n;
    sc.lambda = lambda;
    sc.arrivals = std::move(arrivals);
    sc.service = std::move(service);
    sc.patience = patience;
    sc.constants = derive_service_constants(sc.service);
    sc.ca2 = arrival_scv(sc.arrivals);
    sc.rho = lambda / (n * sc.constants.mu);
    sc.beta = std::sqrt(static_cast<double>(n)) * (1.0 - sc.rho);
    require(has_patience(sc.patience) || sc.rho < 1.0,
            "scenario: infinite patience requires rho < 1 (no steady state otherwise)");
    return sc;
  }
};

enum class ModelKind { DensityAtZero, HazardRate };

inline std::string to_string(ModelKind k) {
  return k == ModelKind::DensityAtZero ? "density_at_zero" : "hazard_rate";
}

/// Supremum of the hazard over [0, inf).
inline double hazard_supremum(const PatienceModel& pm) {
  return std::visit(detail::overloaded{
                        [](const NoPatience&) { return 0.0; },
                        [](const ExponentialPatience& e) { return e.rate; },
                        [](const ErlangPatience& e) { return e.theta; },
                        [](const HyperexponentialPatience& h) { return h.p[0] * h.rate[0] + h.p[1] * h.rate[1]; },
                    },
                    pm);
}

/// dX = b(X)dt + sigma dB with
///   b(x) = -beta mu p - R(x - p (e'x)^+) - p A((e'x)^+),
/// A(z) = alpha z (density-at-zero model) or eta(z) (hazard-rate model).
class DiffusionModel {
 public:
  DiffusionModel(ModelKind kind, Eigen::VectorXd p, Eigen::MatrixXd R, double mu, double beta,
                 Eigen::MatrixXd sigma, double alpha, PatienceModel patience, double n, double lambda)
      : kind_(kind),
        p_(std::move(p)),
        R_(std::move(R)),
        sigma_(std::move(sigma)),
        alpha_(alpha),
        patience_(patience),
        n_(n),
        lambda_(lambda),
        beta_(beta),
        mu_(mu) {
    d_ = static_cast<int>(p_.size());
    c0_ = -beta * mu * p_;
    Rp_ = R_ * p_;
    require(sigma_.rows() == d_ && sigma_.cols() == d_, "model: covariance has wrong shape");
    require((sigma_ - sigma_.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * sigma_.cwiseAbs().maxCoeff(),
            "model: covariance is not symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(sigma_);
    if (llt.info() != Eigen::Success) throw NumericalFailure("model: covariance is not positive definite");
  }

  [[nodiscard]] int dimension() const { return d_; }
  [[nodiscard]] ModelKind kind() const { return kind_; }
  [[nodiscard]] const Eigen::MatrixXd& covariance() const { return sigma_; }
  [[nodiscard]] const Eigen::VectorXd& p() const { return p_; }
  [[nodiscard]] const Eigen::MatrixXd& R() const { return R_; }
  [[nodiscard]] double alpha() const { return alpha_; }
  [[nodiscard]] double beta() const { return beta_; }
  [[nodiscard]] double mu() const { return mu_; }

  /// A(z) for z >= 0.
  [[nodiscard]] double abandonment(double z) const {
    return kind_ == ModelKind::DensityAtZero ? alpha_ * z : eta(patience_, z, n_, lambda_);
  }

  void drift(const double* x, double* out) const {
    double s = 0.0;
    for (int j = 0; j < d_; ++j) s += x[j];
    const double sp = std::max(s, 0.0);
    const double ab = sp > 0.0 ? abandonment(sp) : 0.0;
    for (int k = 0; k < d_; ++k) {
      double rx = 0.0;
      for (int j = 0; j < d_; ++j) rx += R_(k, j) * x[j];
      out[k] = c0_(k) - rx + Rp_(k) * sp - p_(k) * ab;
    }
  }

  [[nodiscard]] Eigen::VectorXd drift(const Eigen::VectorXd& x) const {
    require(x.size() == d_, "model: state has wrong dimension");
    Eigen::VectorXd out(d_);
    drift(x.data(), out.data());
    return out;
  }

  /// Global Lipschitz constant bound for b in the Euclidean norm.
  [[nodiscard]] double lipschitz_bound() const {
    const double slope = kind_ == ModelKind::DensityAtZero ? alpha_ : hazard_supremum(patience_);
    const double rootd = std::sqrt(static_cast<double>(d_));
    return R_.norm() + (Rp_.norm() + p_.norm() * slope) * rootd;
  }

 private:
  ModelKind kind_;
  int d_ = 0;
  Eigen::VectorXd p_;
  Eigen::MatrixXd R_;
  Eigen::MatrixXd sigma_;
  double alpha_;
  PatienceModel patience_;
  double n_;
  double lambda_;
  double beta_;
  double mu_;
  Eigen::VectorXd c0_;
  Eigen::VectorXd Rp_;
};

/// Gf(x) = sum_j b_j df/dx_j + 1/2 sum_jl Sigma_jl d2f/dx_j dx_l.
inline double apply_generator(const DiffusionModel& dm, const Eigen::VectorXd& x, const Eigen::VectorXd& grad,
                              const Eigen::MatrixXd& hess) {
  const Eigen::VectorXd b = dm.drift(x);
  return b.dot(grad) + 0.5 * (dm.covariance().cwiseProduct(hess)).sum();
}

namespace detail {

/// Covariance with scale factors a = rho and c = rho ^ 1 made explicit.
inline Eigen::MatrixXd covariance(const QueueScenario& sc, double a, double c) {
  const auto& pt = sc.service;
  const auto& k = sc.constants;
  const int d = pt.phases();
  auto multinomial = [d](const Eigen::VectorXd& q) {
    Eigen::MatrixXd H = -q * q.transpose();
    for (int i = 0; i < d; ++i) H(i, i) = q(i) * (1.0 - q(i));
    return H;
  };
  Eigen::MatrixXd routing = Eigen::MatrixXd::Zero(d, d);
  for (int j = 0; j < d; ++j) {
    routing += pt.nu(j) * k.gamma(j) * multinomial(pt.P.row(j).transpose());
  }
  const Eigen::MatrixXd IminusP = Eigen::MatrixXd::Identity(d, d) - pt.P;
  routing += IminusP.transpose() * pt.nu.cwiseProduct(k.gamma).asDiagonal() * IminusP;
  Eigen::MatrixXd S = a * k.mu * (sc.ca2 * pt.p * pt.p.transpose() + multinomial(pt.p)) + c * routing;
  return 0.5 * (S + S.transpose());
}

inline DiffusionModel build(const QueueScenario& sc, ModelKind kind, double a, double c) {
  require(sc.rho > 0.0, "model: rho must be > 0");
  double alpha = 0.0;
  if (kind == ModelKind::DensityAtZero) {
    alpha = density_at_zero(sc.patience);
    require(alpha > 0.0 || sc.rho < 1.0,
            "model: zero patience density at 0 with rho >= 1 has no stationary distribution");
  } else {
    require(has_patience(sc.patience), "model: hazard-rate model requires a patience distribution");
  }
  return DiffusionModel(kind, sc.service.p, sc.constants.R, sc.constants.mu, sc.beta, covariance(sc, a, c), alpha,
                        sc.patience, static_cast<double>(sc.n), sc.lambda);
}

}  // namespace detail

inline DiffusionModel build_model(const QueueScenario& sc, ModelKind kind) {
  return detail::build(sc, kind, sc.rho, std::min(sc.rho, 1.0));
}

/// Same drift as build_model; rho replaced by 1 in the covariance factors.
inline DiffusionModel limit_model(const QueueScenario& sc, ModelKind kind = ModelKind::DensityAtZero) {
  return detail::build(sc, kind, 1.0, 1.0);
}

}  // namespace msq
