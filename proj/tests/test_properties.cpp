// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "support.hpp"

namespace {

void expect(const msqtest::Check& c) { EXPECT_TRUE(c.ok) << c.detail; }

}  // namespace

TEST(Properties, BasisCardinality) { expect(msqtest::check_basis_cardinality()); }
TEST(Properties, CubicReproduction) { expect(msqtest::check_cubic_reproduction()); }
TEST(Properties, SystemSymmetricPositiveDefiniteAndSolved) { expect(msqtest::check_system_properties()); }
TEST(Properties, DriftHingeContinuity) { expect(msqtest::check_drift_hinge()); }
TEST(Properties, HazardModelWithExponentialPatienceIsDensityAtZeroModel) {
  expect(msqtest::check_model2_exponential());
}
TEST(Properties, ReferenceContinuousAtZero) { expect(msqtest::check_reference_continuity()); }
TEST(Properties, SimulatorFlowConservation) { expect(msqtest::check_flow_conservation()); }
TEST(Properties, QbdPmfNonnegativeAndNormalized) { expect(msqtest::check_qbd_pmf()); }
