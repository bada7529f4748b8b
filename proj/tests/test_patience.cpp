// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <random>

#include "msq/patience.hpp"

namespace {

double quad_eta(const msq::PatienceModel& pm, double z, double n, double lambda) {
  auto h = [&](double u) { return msq::hazard(pm, std::sqrt(n) * u / lambda); };
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(h, 0.0, z, 15, 1e-13);
}

// Erlang survival from the Poisson sum; hazard = density / survival.
double erlang_hazard(int k, double theta, double t) {
  double term = 1.0;
  double surv = 1.0;
  for (int l = 1; l < k; ++l) {
    term *= theta * t / l;
    surv += term;
  }
  return theta * term / surv;
}

}  // namespace

TEST(Patience, ErlangHazardMatchesDensityOverSurvival) {
  for (int k : {1, 2, 3, 5}) {
    for (double t : {0.0, 0.01, 0.3, 1.0, 4.0, 30.0}) {
      const msq::ErlangPatience e{k, 2.0};
      EXPECT_NEAR(msq::hazard(e, t), erlang_hazard(k, 2.0, t), 1e-12 * (1.0 + erlang_hazard(k, 2.0, t)))
          << "k=" << k << " t=" << t;
    }
  }
  EXPECT_NEAR(msq::hazard(msq::ErlangPatience{3, 2.0}, 1e4), 2.0, 1e-3);
}

TEST(Patience, LowestNonzeroDerivativeByFiniteDifferences) {
  // h(t) = theta^k t^(k-1)/(k-1)! + O(t^k): check the (k-1)-th derivative at 0
  const double theta = 2.0;
  const double t = 1e-3;
  const msq::ErlangPatience e2{2, theta};
  const msq::ErlangPatience e3{3, theta};
  const double slope = (msq::hazard(e2, t) - msq::hazard(e2, 0.0)) / t;
  EXPECT_NEAR(slope, theta * theta, 1e-2 * theta * theta);
  EXPECT_NEAR(msq::lowest_nonzero_hazard_order(e2)->derivative, theta * theta, 1e-12);
  EXPECT_EQ(msq::lowest_nonzero_hazard_order(e2)->order, 1);
  // second derivative at 0 by a one-sided three-point rule
  const double h0 = msq::hazard(e3, 0.0);
  const double h1 = msq::hazard(e3, t);
  const double h2 = msq::hazard(e3, 2.0 * t);
  const double second = (h2 - 2.0 * h1 + h0) / (t * t);
  EXPECT_NEAR(second, std::pow(theta, 3), 2e-2 * std::pow(theta, 3));
  EXPECT_NEAR(msq::lowest_nonzero_hazard_order(e3)->derivative, std::pow(theta, 3), 1e-12);
  EXPECT_EQ(msq::lowest_nonzero_hazard_order(e3)->order, 2);
  EXPECT_NEAR(msq::hazard_slope_at_zero(e2), theta * theta, 1e-12);
}

TEST(Patience, EtaMatchesQuadratureOfHazard) {
  const std::vector<msq::PatienceModel> models = {
      msq::ExponentialPatience{0.5}, msq::ErlangPatience{2, 2.0}, msq::ErlangPatience{3, 2.0},
      msq::HyperexponentialPatience{{0.5, 0.5}, {0.2, 100.0}}};
  for (const auto& pm : models) {
    for (double n : {50.0, 500.0}) {
      const double lambda = 1.05 * n;
      for (double z : {0.0, 0.1, 1.0, 5.0, 25.0}) {
        const double want = quad_eta(pm, z, n, lambda);
        EXPECT_NEAR(msq::eta(pm, z, n, lambda), want, 1e-10 * (1.0 + want)) << msq::family_name(pm) << " z=" << z;
      }
    }
  }
}

TEST(Patience, HyperexponentialHazardDecreasesToSlowRate) {
  const msq::HyperexponentialPatience h{{0.5, 0.5}, {0.2, 100.0}};
  EXPECT_NEAR(msq::density_at_zero(h), 50.1, 1e-12);
  double prev = msq::hazard(h, 0.0);
  for (double t = 0.01; t < 5.0; t += 0.01) {
    const double v = msq::hazard(h, t);
    EXPECT_LE(v, prev + 1e-12);
    prev = v;
  }
  EXPECT_NEAR(msq::hazard(h, 1e3), 0.2, 1e-12);
  EXPECT_NEAR(msq::hazard_infimum(h), 0.2, 1e-15);
  EXPECT_NEAR(msq::hazard_slope_at_zero(h), -0.25 * 99.8 * 99.8, 1e-9);
}

TEST(Patience, SamplesHaveTheRightMean) {
  std::mt19937_64 rng(9);
  const std::vector<std::pair<msq::PatienceModel, double>> cases = {
      {msq::ExponentialPatience{0.5}, 2.0},
      {msq::ErlangPatience{3, 2.0}, 1.5},
      {msq::HyperexponentialPatience{{0.5, 0.5}, {0.2, 100.0}}, 0.5 / 0.2 + 0.5 / 100.0}};
  for (const auto& [pm, mean] : cases) {
    const int n = 200000;
    double s = 0.0;
    double s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = msq::sample_patience(pm, rng);
      s += x;
      s2 += x * x;
    }
    const double m = s / n;
    const double se = std::sqrt((s2 / n - m * m) / n);
    EXPECT_NEAR(m, mean, 5.0 * se) << msq::family_name(pm);
  }
  EXPECT_TRUE(std::isinf(msq::sample_patience(msq::NoPatience{}, rng)));
}

TEST(Patience, ValidationRejectsBadParameters) {
  EXPECT_THROW(msq::validate(msq::ExponentialPatience{0.0}), msq::InvalidInput);
  EXPECT_THROW(msq::validate(msq::ErlangPatience{0, 1.0}), msq::InvalidInput);
  EXPECT_THROW(msq::validate(msq::HyperexponentialPatience{{0.6, 0.6}, {1.0, 2.0}}), msq::InvalidInput);
  EXPECT_THROW(msq::hazard(msq::ExponentialPatience{1.0}, -1.0), msq::InvalidInput);
}
