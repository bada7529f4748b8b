// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <vector>

#include <boost/math/special_functions/legendre.hpp>

#include "msq/error.hpp"

namespace msq {

/// Gauss-Legendre rule mapped to [0, 1]; weights sum to 1.
/// Treatment of elements cut by a hyperplane e'x = z in tail integrals.
enum class CutRule { Indicator, Split };

struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  [[nodiscard]] int order() const { return static_cast<int>(nodes.size()); }
};

inline GaussRule gauss_legendre(int order) {
  require(order >= 1, "quadrature: order must be >= 1");
  // Boost returns the nonnegative zeros of P_order in increasing order.
  const std::vector<double> zeros = boost::math::legendre_p_zeros<double>(order);
  std::vector<std::pair<double, double>> pts;
  for (double x : zeros) {
    const double dp = boost::math::legendre_p_prime(order, x);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    pts.emplace_back(x, w);
    if (x != 0.0) pts.emplace_back(-x, w);
  }
  std::sort(pts.begin(), pts.end());
  GaussRule rule;
  for (const auto& [x, w] : pts) {
    rule.nodes.push_back(0.5 * (x + 1.0));
    rule.weights.push_back(0.5 * w);
  }
  return rule;
}

}  // namespace msq
