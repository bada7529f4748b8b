// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "msq/error.hpp"
#include "msq/measures.hpp"

namespace msq {

/// M/H2/n+M customer-count chain. Level l holds min(l, n) + 1 states indexed
/// by the number of busy servers in phase 1. Above the cap the abandonment
/// rate is frozen at alpha (cap - n); with alpha = 0 the cap is n.
struct QbdSpec {
  int n = 1;
  double lambda = 0.0;
  Eigen::VectorXd p;   ///< 1 or 2 phase probabilities
  Eigen::VectorXd nu;  ///< phase rates
  double alpha = 0.0;
  int cap_offset = 2000;
  int checkpoint_stride = 50;

  [[nodiscard]] int cap() const { return alpha > 0.0 ? n + cap_offset : n; }
};

struct QbdResult {
  std::vector<double> pmf;  ///< P[N = l] for l up to max(cap, n + 1)
  double tail_mass_above_cap = 0.0;  ///< P[N > pmf.size() - 1], below 1e-16 unless huge
  PerformanceReport report;
};

namespace detail {

class QbdBlocks {
 public:
  explicit QbdBlocks(const QbdSpec& s) : s_(s) {
    if (s.p.size() == 1) {
      p1_ = 1.0;
      nu1_ = nu2_ = s.nu(0);
    } else {
      p1_ = s.p(0);
      nu1_ = s.nu(0);
      nu2_ = s.nu(1);
    }
  }

  [[nodiscard]] int size(int level) const { return std::min(level, s_.n) + 1; }

  [[nodiscard]] double abandonment_rate(int level) const {
    return s_.alpha * std::max(0, std::min(level, s_.cap()) - s_.n);
  }

  /// Diagonal of the within-level block (negative total outflow).
  [[nodiscard]] Eigen::VectorXd A1(int level) const {
    const int m = size(level);
    const int busy = std::min(level, s_.n);
    Eigen::VectorXd d(m);
    for (int k = 0; k < m; ++k) {
      d(k) = -(s_.lambda + k * nu1_ + (busy - k) * nu2_ + abandonment_rate(level));
    }
    return d;
  }

  /// Up block, level -> level + 1.
  [[nodiscard]] Eigen::SparseMatrix<double> A0(int level) const {
    const int m = size(level);
    Eigen::SparseMatrix<double> A(m, size(level + 1));
    std::vector<Eigen::Triplet<double>> t;
    for (int k = 0; k < m; ++k) {
      if (level < s_.n) {
        if (p1_ > 0.0) t.emplace_back(k, k + 1, s_.lambda * p1_);
        if (p1_ < 1.0) t.emplace_back(k, k, s_.lambda * (1.0 - p1_));
      } else {
        t.emplace_back(k, k, s_.lambda);
      }
    }
    A.setFromTriplets(t.begin(), t.end());
    return A;
  }

  /// Down block, level -> level - 1 (level >= 1).
  [[nodiscard]] Eigen::SparseMatrix<double> A2(int level) const {
    const int m = size(level);
    const int busy = std::min(level, s_.n);
    Eigen::SparseMatrix<double> A(m, size(level - 1));
    std::vector<Eigen::Triplet<double>> t;
    for (int k = 0; k < m; ++k) {
      const double r1 = k * nu1_;
      const double r2 = (busy - k) * nu2_;
      if (level <= s_.n) {
        if (r1 > 0.0) t.emplace_back(k, k - 1, r1);
        if (r2 > 0.0) t.emplace_back(k, k, r2);
      } else {
        // completion frees a server for the head of the queue
        if (r1 > 0.0) {
          if (p1_ > 0.0) t.emplace_back(k, k, r1 * p1_);
          if (p1_ < 1.0) t.emplace_back(k, k - 1, r1 * (1.0 - p1_));
        }
        if (r2 > 0.0) {
          if (p1_ > 0.0) t.emplace_back(k, k + 1, r2 * p1_);
          if (p1_ < 1.0) t.emplace_back(k, k, r2 * (1.0 - p1_));
        }
        const double ab = abandonment_rate(level);
        if (ab > 0.0) t.emplace_back(k, k, ab);
      }
    }
    A.setFromTriplets(t.begin(), t.end());
    return A;
  }

 private:
  const QbdSpec& s_;
  double p1_ = 1.0;
  double nu1_ = 1.0;
  double nu2_ = 1.0;
};

/// Minimal nonnegative R of A0 + R A1 + R^2 A2 = 0 through G from
/// logarithmic reduction.
inline Eigen::MatrixXd homogeneous_R(const Eigen::MatrixXd& A0, const Eigen::MatrixXd& A1, const Eigen::MatrixXd& A2) {
  const Eigen::Index m = A1.rows();
  const Eigen::PartialPivLU<Eigen::MatrixXd> negA1(-A1);
  Eigen::MatrixXd H = negA1.solve(A0);
  Eigen::MatrixXd L = negA1.solve(A2);
  Eigen::MatrixXd G = L;
  Eigen::MatrixXd T = H;
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(m, m);
  for (int it = 0; it < 200; ++it) {
    const Eigen::MatrixXd U = H * L + L * H;
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(I - U);
    const Eigen::MatrixXd H2 = H * H;
    const Eigen::MatrixXd L2 = L * L;
    H = lu.solve(H2);
    L = lu.solve(L2);
    G += T * L;
    T = T * H;
    const double gap = (Eigen::VectorXd::Ones(m) - G.rowwise().sum()).cwiseAbs().maxCoeff();
    if (gap < 1e-14 || T.cwiseAbs().maxCoeff() < 1e-300) break;
  }
  const Eigen::MatrixXd M = -(A1 + A0 * G);
  return M.transpose().partialPivLu().solve(A0.transpose()).transpose();
}

/// R_l = A0(l) (-A1(l+1) - R_{l+1} A2(l+2))^{-1}.
/// The diagonal of M is rebuilt from its row sums, which equal the down rates
/// A2(l+1) e because R_{l+1} A2(l+2) e = A0(l+1) e. Subtracting the diagonal
/// directly cancels badly below level n and the error grows geometrically.
inline Eigen::MatrixXd level_R(const QbdBlocks& blocks, int level, const Eigen::MatrixXd& R_next) {
  Eigen::MatrixXd M = -(R_next * blocks.A2(level + 2));
  const Eigen::VectorXd down = blocks.A2(level + 1) * Eigen::VectorXd::Ones(blocks.size(level));
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    const double off = M.row(i).sum() - M(i, i);  // <= 0
    M(i, i) = down(i) - off;
  }
  const Eigen::MatrixXd Minv = M.partialPivLu().inverse();
  return blocks.A0(level) * Minv;
}

}  // namespace detail

/// Stationary law of N by level-dependent matrix-analytic recursion.
/// Memory is bounded by storing every checkpoint_stride-th R matrix.
inline QbdResult qbd_stationary(const QbdSpec& spec, const std::vector<int>& levels = {}) {
  require(spec.n >= 1, "qbd: n must be >= 1");
  require(spec.lambda > 0.0, "qbd: lambda must be > 0");
  require(spec.p.size() == spec.nu.size() && (spec.p.size() == 1 || spec.p.size() == 2),
          "qbd: service must be exponential or two-phase hyperexponential");
  require(spec.alpha >= 0.0, "qbd: abandonment rate must be >= 0");
  require(spec.checkpoint_stride >= 1, "qbd: checkpoint stride must be >= 1");
  const double mu = 1.0 / (spec.p.array() / spec.nu.array()).sum();
  require(spec.alpha > 0.0 || spec.lambda < spec.n * mu, "qbd: no abandonment requires lambda < n mu");

  const detail::QbdBlocks blocks(spec);
  const int cap = spec.cap();
  // Blocks are level independent above max(cap, n), so R_l = R from top on.
  const int top = std::max(cap - 1, spec.n);
  const int last = top + 1;  // levels 0..last are stored, the rest is geometric
  const Eigen::MatrixXd A0 = Eigen::MatrixXd(blocks.A0(last + 1));
  const Eigen::MatrixXd A1 = Eigen::MatrixXd(blocks.A1(last + 1).asDiagonal());
  const Eigen::MatrixXd A2 = Eigen::MatrixXd(blocks.A2(last + 1));
  const Eigen::MatrixXd R = detail::homogeneous_R(A0, A1, A2);

  const int stride = spec.checkpoint_stride;
  std::vector<Eigen::MatrixXd> checkpoints(static_cast<std::size_t>(top / stride + 2));
  {
    Eigen::MatrixXd Rl = R;
    if (top % stride == 0) checkpoints[static_cast<std::size_t>(top / stride)] = Rl;
    for (int l = top - 1; l >= 0; --l) {
      Rl = detail::level_R(blocks, l, Rl);
      if (l % stride == 0) checkpoints[static_cast<std::size_t>(l / stride)] = Rl;
    }
  }

  // Forward pass with log scaling; masses may span hundreds of decades.
  std::vector<double> log_mass(static_cast<std::size_t>(last) + 1);
  Eigen::RowVectorXd pi = Eigen::RowVectorXd::Ones(1);
  double log_scale = 0.0;
  log_mass[0] = 0.0;
  std::vector<Eigen::MatrixXd> segment;
  for (int start = 0; start < last; start += stride) {
    const int end = std::min(start + stride, last);  // levels start..end-1 need R_l
    segment.assign(static_cast<std::size_t>(end - start), Eigen::MatrixXd());
    Eigen::MatrixXd Rl;
    int l = end - 1;
    if (l == top) {
      Rl = R;
    } else {
      // recompute from the next checkpoint (or R at the top)
      int from = end;
      Rl = (from >= top) ? R : checkpoints[static_cast<std::size_t>(from / stride)];
      for (int k = (from >= top ? top : from) - 1; k > l; --k) Rl = detail::level_R(blocks, k, Rl);
      Rl = detail::level_R(blocks, l, Rl);
    }
    segment[static_cast<std::size_t>(l - start)] = Rl;
    for (--l; l >= start; --l) {
      Rl = detail::level_R(blocks, l, Rl);
      segment[static_cast<std::size_t>(l - start)] = Rl;
    }
    for (int k = start; k < end; ++k) {
      pi = pi * segment[static_cast<std::size_t>(k - start)];
      const double s = pi.sum();
      if (!(s > 0.0)) throw NumericalFailure("qbd: level mass vanished");
      pi /= s;
      log_scale += std::log(s);
      log_mass[static_cast<std::size_t>(k + 1)] = log_scale;
    }
  }
  // pi now holds the normalized shape of level last; higher levels follow pi R^k.
  const Eigen::Index m = R.rows();
  const Eigen::MatrixXd IminusR = Eigen::MatrixXd::Identity(m, m) - R;
  const Eigen::PartialPivLU<Eigen::MatrixXd> luIR(IminusR);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(m);
  const Eigen::VectorXd s1 = luIR.solve(ones);               // (I-R)^{-1} e
  const Eigen::VectorXd tail_sum = R * s1;                   // sum_{k>=1} R^k e
  const Eigen::VectorXd tail_k = R * luIR.solve(s1);         // sum_{k>=1} k R^k e
  const double tail_rel = pi * tail_sum;
  const double tail_k_rel = pi * tail_k;

  const double top_log = *std::max_element(log_mass.begin(), log_mass.end());
  double Z = 0.0;
  std::vector<double> mass(log_mass.size());
  for (std::size_t l = 0; l < mass.size(); ++l) {
    mass[l] = std::exp(log_mass[l] - top_log);
    Z += mass[l];
  }
  const double cap_scale = std::exp(log_mass.back() - top_log);
  Z += cap_scale * tail_rel;

  QbdResult out;
  out.pmf.resize(mass.size());
  for (std::size_t l = 0; l < mass.size(); ++l) out.pmf[l] = mass[l] / Z;
  out.tail_mass_above_cap = cap_scale * tail_rel / Z;  // P[N > last]
  const double tail_k_mass = cap_scale * tail_k_rel / Z;

  auto& rep = out.report;
  double queue = 0.0;
  double idle = 0.0;
  double abandon = 0.0;
  for (int l = 0; l <= last; ++l) {
    const double pl = out.pmf[static_cast<std::size_t>(l)];
    if (l > spec.n) {
      queue += (l - spec.n) * pl;
      abandon += blocks.abandonment_rate(l) * pl;
    } else {
      idle += (spec.n - l) * pl;
    }
  }
  queue += (last - spec.n) * out.tail_mass_above_cap + tail_k_mass;
  abandon += spec.alpha * (cap - spec.n) * out.tail_mass_above_cap;
  rep.mean_queue_length = queue;
  rep.mean_idle_servers = idle;
  rep.abandonment_fraction = abandon / spec.lambda;
  // Geometric levels above `last` are appended until the remainder is
  // negligible, so pmf and tails cover every level that carries mass.
  {
    Eigen::RowVectorXd v = pi * (cap_scale / Z);
    double remaining = out.tail_mass_above_cap;
    const int max_extra = std::max(levels.empty() ? 0 : *std::max_element(levels.begin(), levels.end()) - last, 0);
    for (int k = 1; k <= 1000000 && (remaining > 1e-16 || k <= max_extra); ++k) {
      v = v * R;
      const double m = v.sum();
      out.pmf.push_back(m);
      remaining = v.dot(tail_sum);
    }
    out.tail_mass_above_cap = remaining;
  }
  // P[N > l] summed from the top to keep deep tails accurate
  const int stored = static_cast<int>(out.pmf.size()) - 1;
  std::vector<double> above(out.pmf.size());
  double acc = out.tail_mass_above_cap;
  for (int l = stored; l >= 0; --l) {
    above[static_cast<std::size_t>(l)] = acc;
    acc += out.pmf[static_cast<std::size_t>(l)];
  }
  for (int l : levels) {
    require(l >= 0, "qbd: tail level must be >= 0");
    rep.tail.emplace_back(l, above[static_cast<std::size_t>(l)]);
  }
  rep.pmf_first = 0;
  rep.pmf = out.pmf;
  return out;
}

}  // namespace msq
