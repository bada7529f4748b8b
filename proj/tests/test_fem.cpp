// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "support.hpp"

TEST(Fem, BasisCountsOnStandardBox) {
  const auto box = msq::TruncationBox::cube(2, -7.0, 32.0);
  const std::vector<std::pair<double, std::size_t>> want = {{1.0, 5776}, {0.5, 23716}, {0.25, 96100}, {0.125, 386884}};
  for (const auto& [h, m] : want) {
    const auto mesh = msq::build_mesh<2>(box, h);
    EXPECT_EQ(mesh.basis_count(), m) << h;
    // 4 functions per interior node
    const auto interior = static_cast<std::size_t>(std::lround(39.0 / h) - 1);
    EXPECT_EQ(mesh.basis_count(), 4 * interior * interior);
  }
}

TEST(Fem, BasisIndexRoundTrip) {
  const auto mesh = msq::build_mesh<2>(msq::TruncationBox::cube(2, -2.0, 3.0), 1.0);
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(mesh.basis_count()); ++i) {
    const auto b = msqtest::basis_of(mesh, i);
    EXPECT_EQ(mesh.basis_index(b.node, b.type), i);
  }
  EXPECT_EQ(mesh.basis_index({0, 2}, {0, 0}), -1);
}

TEST(Fem, OneDimensionalEntriesMatchBruteForce) {
  const auto cfg = msq::load_config(msqtest::config_path("erlang_a_n50"));
  const auto dm = msq::build_model(cfg.scenario, cfg.model);
  const auto r = msq::reference_for(cfg);
  const auto mesh = msq::build_mesh<1>(msq::TruncationBox::cube(1, -6.0, 10.0), 0.5);
  const auto sys = msq::assemble(dm, r, mesh, msq::AssemblyOptions{8, 1});
  const Eigen::SparseMatrix<double> sym = sys.A.selfadjointView<Eigen::Lower>();
  const Eigen::MatrixXd A = Eigen::MatrixXd(sym);
  const double amax = A.cwiseAbs().maxCoeff();
  for (std::int64_t i = 0; i < A.rows(); ++i) {
    for (std::int64_t l = std::max<std::int64_t>(0, i - 4); l < std::min<std::int64_t>(A.rows(), i + 5); ++l) {
      EXPECT_NEAR(A(i, l), msqtest::brute_force_entry<1>(dm, r, mesh, i, l), 1e-9 * amax) << i << "," << l;
    }
  }
}

TEST(Fem, GiMnDensityMatchesClosedForm) {
  const auto err = msqtest::closed_form_error("gi_m_n50", 0.25);
  EXPECT_LT(err.l1, 1e-3);
  EXPECT_LT(err.sup, 1e-3);
}

TEST(Fem, ErlangADensityMatchesClosedForm) {
  const auto err = msqtest::closed_form_error("erlang_a_n50", 0.25);
  EXPECT_LT(err.l1, 1e-3);
  EXPECT_LT(err.sup, 1e-3);
}

TEST(Fem, OneDimensionalLimitIsReproducedAtEveryElementSize) {
  // in d = 1 the reference density is the exact limit density, so the solved
  // correction is constant and any mesh reproduces it up to rounding
  for (const char* name : {"gi_m_n50", "erlang_a_n50"}) {
    for (double h : {1.0, 0.5, 0.25}) {
      const auto e = msqtest::closed_form_error(name, h);
      EXPECT_LT(e.l1, 1e-8) << name << " h=" << h;
      EXPECT_LT(e.sup, 1e-8) << name << " h=" << h;
    }
  }
}

TEST(Fem, NonpositiveNormRaisesNumericalFailure) {
  const auto cfg = msq::load_config(msqtest::config_path("erlang_a_n50"));
  const auto dm = msq::build_model(cfg.scenario, cfg.model);
  const auto r = msq::reference_for(cfg);
  const auto mesh = msq::build_mesh<1>(*cfg.mesh.box, 0.5);
  auto sys = msq::assemble(dm, r, mesh, msq::AssemblyOptions{8, 1});
  sys.reference_mass = 0.0;  // forces ||c - cbar||^2 = -v'u < 0
  EXPECT_THROW(msq::solve_field(sys, dm, r, mesh), msq::NumericalFailure);
}

TEST(Fem, NaiveReferenceIsFlagged) {
  const auto cfg = msq::load_config(msqtest::config_path("example1_n500_naive"));
  bool detected = false;
  try {
    const auto run = msq::run_model(cfg);
    detected = run.diagnostics.suspect_reference && run.diagnostics.condition_estimate > 1e100;
  } catch (const msq::NumericalFailure&) {
    detected = true;
  }
  EXPECT_TRUE(detected);
}

TEST(Fem, StandardReferenceIsNotFlagged) {
  const auto run = msq::run_model(msq::load_config(msqtest::config_path("example1_n50")));
  EXPECT_FALSE(run.diagnostics.suspect_reference);
  EXPECT_LT(run.diagnostics.residual, 1e-8);
  EXPECT_NEAR(run.diagnostics.normalization, 1.0, 1e-6);
}

TEST(Fem, ThreadCountDoesNotChangeTheSystem) {
  const auto cfg = msqtest::small_h2_config();
  const auto dm = msq::build_model(cfg.scenario, cfg.model);
  const auto r = msq::reference_for(cfg);
  const auto mesh = msq::build_mesh<2>(*cfg.mesh.box, 1.0);
  const auto a = msq::assemble(dm, r, mesh, msq::AssemblyOptions{8, 1});
  const auto b = msq::assemble(dm, r, mesh, msq::AssemblyOptions{8, 3});
  EXPECT_EQ((Eigen::MatrixXd(a.A) - Eigen::MatrixXd(b.A)).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((a.v - b.v).cwiseAbs().maxCoeff(), 0.0);
}
