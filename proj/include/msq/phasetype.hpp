// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "msq/error.hpp"

namespace msq {

/// Phase-type law: start in phase j w.p. p_j, stay Exp(nu_j), then move to
/// phase l w.p. P(j,l) or absorb w.p. 1 - sum_l P(j,l).
struct PhaseTypeDistribution {
  Eigen::VectorXd p;
  Eigen::VectorXd nu;
  Eigen::MatrixXd P;

  [[nodiscard]] int phases() const { return static_cast<int>(p.size()); }

  /// Throws InvalidInput on any invariant violation, including a
  /// non-transient routing matrix.
  void validate() const {
    const auto d = p.size();
    require(d >= 1, "phase-type: at least one phase required");
    require(nu.size() == d, "phase-type: nu must have the same length as p");
    require(P.rows() == d && P.cols() == d, "phase-type: P must be d x d");
    for (Eigen::Index j = 0; j < d; ++j) {
      require(std::isfinite(p(j)) && p(j) >= 0.0, "phase-type: p entries must be >= 0");
      require(std::isfinite(nu(j)) && nu(j) > 0.0, "phase-type: nu entries must be > 0");
      require(P(j, j) == 0.0, "phase-type: diagonal of P must be 0");
      double row = 0.0;
      for (Eigen::Index l = 0; l < d; ++l) {
        require(std::isfinite(P(j, l)) && P(j, l) >= 0.0, "phase-type: P entries must be >= 0");
        row += P(j, l);
      }
      require(row <= 1.0 + 1e-12, "phase-type: row sums of P must be <= 1");
    }
    require(std::abs(p.sum() - 1.0) <= 1e-12, "phase-type: p must sum to 1");
    const Eigen::MatrixXd IminusP = Eigen::MatrixXd::Identity(d, d) - P;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(IminusP);
    lu.setThreshold(1e-12);
    require(lu.isInvertible(), "phase-type: I - P is singular (routing is not transient)");
  }

  static PhaseTypeDistribution hyperexponential(Eigen::VectorXd probs, Eigen::VectorXd rates) {
    const auto d = probs.size();
    PhaseTypeDistribution pt{std::move(probs), std::move(rates), Eigen::MatrixXd::Zero(d, d)};
    pt.validate();
    return pt;
  }

  static PhaseTypeDistribution exponential(double rate) {
    return hyperexponential(Eigen::VectorXd::Ones(1), Eigen::VectorXd::Constant(1, rate));
  }
};

struct ServiceConstants {
  double mu = 0.0;
  Eigen::VectorXd gamma;
  Eigen::MatrixXd R;
  double cs2 = 0.0;
  double mean = 0.0;
  double second_moment = 0.0;
};

/// k-th raw moment: k! p' ((I-P)^{-1} diag(1/nu))^k e.
inline double phase_type_moment(const PhaseTypeDistribution& pt, int k) {
  const auto d = pt.p.size();
  const Eigen::MatrixXd IminusP = Eigen::MatrixXd::Identity(d, d) - pt.P;
  const Eigen::MatrixXd M =
      IminusP.fullPivLu().solve(Eigen::MatrixXd(pt.nu.cwiseInverse().asDiagonal()));
  Eigen::VectorXd v = Eigen::VectorXd::Ones(d);
  double factorial = 1.0;
  for (int i = 1; i <= k; ++i) {
    v = M * v;
    factorial *= i;
  }
  return factorial * pt.p.dot(v);
}

inline ServiceConstants derive_service_constants(const PhaseTypeDistribution& pt) {
  pt.validate();
  const auto d = pt.p.size();
  ServiceConstants sc;
  sc.mean = phase_type_moment(pt, 1);
  sc.second_moment = phase_type_moment(pt, 2);
  sc.mu = 1.0 / sc.mean;
  sc.cs2 = sc.second_moment / (sc.mean * sc.mean) - 1.0;
  sc.R = (Eigen::MatrixXd::Identity(d, d) - pt.P.transpose()) * pt.nu.asDiagonal();
  sc.gamma = sc.mu * sc.R.fullPivLu().solve(pt.p);
  return sc;
}

/// Rescales all phase rates so the mean becomes `mean`; gamma and cs2 are
/// scale invariant.
inline PhaseTypeDistribution with_mean(const PhaseTypeDistribution& pt, double mean) {
  require(mean > 0.0, "phase-type: target mean must be > 0");
  const double current = phase_type_moment(pt, 1);
  PhaseTypeDistribution out = pt;
  out.nu *= current / mean;
  out.validate();
  return out;
}

struct PhaseVisit {
  int phase = 0;
  double duration = 0.0;
};

/// Precomputed categorical laws for repeated path sampling. Not shareable
/// across threads; use one instance per RNG stream.
class PhaseTypeSampler {
 public:
  explicit PhaseTypeSampler(const PhaseTypeDistribution& pt) : nu_(pt.nu) {
    pt.validate();
    const auto d = pt.p.size();
    start_ = std::discrete_distribution<int>(pt.p.data(), pt.p.data() + d);
    next_.reserve(static_cast<std::size_t>(d));
    absorbing_only_ = pt.P.isZero(0.0);
    for (Eigen::Index j = 0; j < d; ++j) {
      std::vector<double> w(static_cast<std::size_t>(d) + 1);
      double row = 0.0;
      for (Eigen::Index l = 0; l < d; ++l) {
        w[static_cast<std::size_t>(l)] = pt.P(j, l);
        row += pt.P(j, l);
      }
      w[static_cast<std::size_t>(d)] = std::max(0.0, 1.0 - row);
      next_.emplace_back(w.begin(), w.end());
    }
  }

  [[nodiscard]] int phases() const { return static_cast<int>(nu_.size()); }
  [[nodiscard]] double rate(int phase) const { return nu_(phase); }

  template <class Rng>
  int initial_phase(Rng& rng) const {
    return start_(rng);
  }

  /// Returns the next phase, or -1 on absorption.
  template <class Rng>
  int next_phase(int phase, Rng& rng) const {
    if (absorbing_only_) return -1;
    const int l = next_[static_cast<std::size_t>(phase)](rng);
    return l == phases() ? -1 : l;
  }

  template <class Rng>
  double holding_time(int phase, Rng& rng) const {
    return std::exponential_distribution<double>(nu_(phase))(rng);
  }

  template <class Rng>
  std::vector<PhaseVisit> path(Rng& rng) const {
    std::vector<PhaseVisit> out;
    for (int j = initial_phase(rng); j >= 0; j = next_phase(j, rng)) {
      out.push_back({j, holding_time(j, rng)});
    }
    return out;
  }

 private:
  Eigen::VectorXd nu_;
  mutable std::discrete_distribution<int> start_;
  mutable std::vector<std::discrete_distribution<int>> next_;
  bool absorbing_only_ = false;
};

template <class Rng>
std::vector<PhaseVisit> sample_service_path(const PhaseTypeDistribution& pt, Rng& rng) {
  return PhaseTypeSampler(pt).path(rng);
}

}  // namespace msq
