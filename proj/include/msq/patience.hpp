// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "msq/error.hpp"

namespace msq {

struct NoPatience {};

struct ExponentialPatience {
  double rate = 0.0;
};

/// Sum of k iid Exp(theta) stages.
struct ErlangPatience {
  int k = 1;
  double theta = 1.0;
};

struct HyperexponentialPatience {
  std::array<double, 2> p{1.0, 0.0};
  std::array<double, 2> rate{1.0, 1.0};
};

using PatienceModel =
    std::variant<NoPatience, ExponentialPatience, ErlangPatience, HyperexponentialPatience>;

/// Lowest order l0 with a nonzero hazard derivative at 0 and that derivative.
struct HazardOrder {
  int order = 0;
  double derivative = 0.0;
};

namespace detail {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

inline double log_sum_exp(const std::vector<double>& terms) {
  const double top = *std::max_element(terms.begin(), terms.end());
  if (!std::isfinite(top)) return top;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - top);
  return top + std::log(s);
}

}  // namespace detail

inline void validate(const PatienceModel& pm) {
  std::visit(detail::overloaded{
                 [](const NoPatience&) {},
                 [](const ExponentialPatience& e) {
                   require(std::isfinite(e.rate) && e.rate > 0.0, "patience: exponential rate must be > 0");
                 },
                 [](const ErlangPatience& e) {
                   require(e.k >= 1, "patience: Erlang k must be >= 1");
                   require(std::isfinite(e.theta) && e.theta > 0.0, "patience: Erlang theta must be > 0");
                 },
                 [](const HyperexponentialPatience& h) {
                   for (int i = 0; i < 2; ++i) {
                     require(h.p[i] >= 0.0, "patience: hyperexponential p must be >= 0");
                     require(std::isfinite(h.rate[i]) && h.rate[i] > 0.0,
                             "patience: hyperexponential rates must be > 0");
                   }
                   require(std::abs(h.p[0] + h.p[1] - 1.0) <= 1e-12, "patience: hyperexponential p must sum to 1");
                 },
             },
             pm);
}

[[nodiscard]] inline bool has_patience(const PatienceModel& pm) {
  return !std::holds_alternative<NoPatience>(pm);
}

/// h(t); identically 0 for NoPatience.
inline double hazard(const PatienceModel& pm, double t) {
  require(t >= 0.0, "patience: hazard requires t >= 0");
  return std::visit(
      detail::overloaded{
          [](const NoPatience&) { return 0.0; },
          [](const ExponentialPatience& e) { return e.rate; },
          [t](const ErlangPatience& e) {
            const double x = e.theta * t;
            const int k = e.k;
            if (k == 1) return e.theta;
            if (x == 0.0) return 0.0;
            // ratio x^{k-1}/(k-1)! over sum_{l<k} x^l/l!, evaluated relative to the
            // dominant term to stay finite for large x.
            double denom = 0.0;
            if (x <= 1.0) {
              double term = 1.0;
              for (int l = 0; l < k; ++l) {
                if (l > 0) term *= x / l;
                denom += term;
              }
              return e.theta * term / denom;
            }
            double term = 1.0;  // (k-1)!/l! x^{l-(k-1)} at l = k-1
            for (int l = k - 1; l >= 0; --l) {
              denom += term;
              term *= static_cast<double>(l) / x;
            }
            return e.theta / denom;
          },
          [t](const HyperexponentialPatience& h) {
            // weights relative to the slower exponential avoid underflow
            const int slow = (h.p[1] == 0.0 || (h.p[0] > 0.0 && h.rate[0] <= h.rate[1])) ? 0 : 1;
            double num = 0.0;
            double den = 0.0;
            for (int i = 0; i < 2; ++i) {
              const double w = h.p[i] * std::exp(-(h.rate[i] - h.rate[slow]) * t);
              num += w * h.rate[i];
              den += w;
            }
            return num / den;
          },
      },
      pm);
}

/// alpha = h(0).
inline double density_at_zero(const PatienceModel& pm) { return hazard(pm, 0.0); }

/// eta(z) = integral_0^z h(sqrt(n) u / lambda) du, closed form per family.
inline double eta(const PatienceModel& pm, double z, double n, double lambda) {
  require(z >= 0.0, "patience: eta requires z >= 0");
  require(n >= 1.0 && lambda > 0.0, "patience: eta requires n >= 1 and lambda > 0");
  const double s = std::sqrt(n) / lambda;
  return std::visit(detail::overloaded{
                        [](const NoPatience&) { return 0.0; },
                        [z](const ExponentialPatience& e) { return e.rate * z; },
                        [z, s](const ErlangPatience& e) {
                          if (e.k == 1 || z == 0.0) return e.theta * z;
                          const double x = s * e.theta * z;
                          std::vector<double> logs(static_cast<std::size_t>(e.k));
                          double lf = 0.0;
                          for (int m = 0; m < e.k; ++m) {
                            if (m > 0) lf += std::log(static_cast<double>(m));
                            logs[static_cast<std::size_t>(m)] = m * std::log(x) - lf;
                          }
                          return e.theta * z - detail::log_sum_exp(logs) / s;
                        },
                        [z, s](const HyperexponentialPatience& h) {
                          std::vector<double> logs;
                          for (int i = 0; i < 2; ++i) {
                            if (h.p[i] > 0.0) logs.push_back(std::log(h.p[i]) - s * h.rate[i] * z);
                          }
                          return -detail::log_sum_exp(logs) / s;
                        },
                    },
                    pm);
}

/// First derivative of h at 0.
inline double hazard_slope_at_zero(const PatienceModel& pm) {
  return std::visit(detail::overloaded{
                        [](const NoPatience&) { return 0.0; },
                        [](const ExponentialPatience&) { return 0.0; },
                        [](const ErlangPatience& e) { return e.k == 2 ? e.theta * e.theta : 0.0; },
                        [](const HyperexponentialPatience& h) {
                          const double d = h.rate[0] - h.rate[1];
                          return -h.p[0] * h.p[1] * d * d;
                        },
                    },
                    pm);
}

/// Exact lowest nonzero hazard derivative at 0; absent for NoPatience.
/// For Erlang-k the hazard is theta^k t^{k-1}/(k-1)! + O(t^k), so the
/// (k-1)-th derivative at 0 is theta^k.
inline std::optional<HazardOrder> lowest_nonzero_hazard_order(const PatienceModel& pm) {
  return std::visit(
      detail::overloaded{
          [](const NoPatience&) -> std::optional<HazardOrder> { return std::nullopt; },
          [](const ExponentialPatience& e) -> std::optional<HazardOrder> { return HazardOrder{0, e.rate}; },
          [](const ErlangPatience& e) -> std::optional<HazardOrder> {
            return HazardOrder{e.k - 1, std::pow(e.theta, e.k)};
          },
          [](const HyperexponentialPatience& h) -> std::optional<HazardOrder> {
            return HazardOrder{0, h.p[0] * h.rate[0] + h.p[1] * h.rate[1]};
          },
      },
      pm);
}

/// Infimum of h over [0, inf); the rate used by the auxiliary exponential
/// queue for steep decreasing hazards.
inline double hazard_infimum(const PatienceModel& pm) {
  return std::visit(detail::overloaded{
                        [](const NoPatience&) { return 0.0; },
                        [](const ExponentialPatience& e) { return e.rate; },
                        [](const ErlangPatience&) { return 0.0; },
                        [](const HyperexponentialPatience& h) {
                          double m = std::numeric_limits<double>::infinity();
                          for (int i = 0; i < 2; ++i) {
                            if (h.p[i] > 0.0) m = std::min(m, h.rate[i]);
                          }
                          return m;
                        },
                    },
                    pm);
}

/// +inf for NoPatience.
template <class Rng>
double sample_patience(const PatienceModel& pm, Rng& rng) {
  return std::visit(
      detail::overloaded{
          [](const NoPatience&) { return std::numeric_limits<double>::infinity(); },
          [&rng](const ExponentialPatience& e) { return std::exponential_distribution<double>(e.rate)(rng); },
          [&rng](const ErlangPatience& e) {
            return std::gamma_distribution<double>(e.k, 1.0 / e.theta)(rng);
          },
          [&rng](const HyperexponentialPatience& h) {
            const int i = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < h.p[0] ? 0 : 1;
            return std::exponential_distribution<double>(h.rate[i])(rng);
          },
      },
      pm);
}

inline std::string family_name(const PatienceModel& pm) {
  return std::visit(detail::overloaded{
                        [](const NoPatience&) { return std::string("none"); },
                        [](const ExponentialPatience&) { return std::string("exponential"); },
                        [](const ErlangPatience&) { return std::string("erlang"); },
                        [](const HyperexponentialPatience&) { return std::string("hyperexponential"); },
                    },
                    pm);
}

}  // namespace msq
