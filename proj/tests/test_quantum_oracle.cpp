#include <doctest.h>

#include "nvgyro/error.hpp"
#include "nvgyro/quantum_oracle.hpp"

using namespace nvgyro;

namespace {

OracleConfig two_level(int cutoff) {
  OracleConfig c;
  c.params = LambdaParams::defaults();
  c.params.omega_2 = 0.0;
  c.params.repump_to_2 = 0.0;
  c.params.nuclear_flip_fraction = 0.0;
  c.fock_cutoff = cutoff;
  return c;
}

}  // namespace

TEST_SUITE("quantum-oracle") {
  TEST_CASE("damped cavity spectrum") {
    OracleConfig c = two_level(4);
    c.params.g_s = 0.0;
    c.params.J = 0.0;
    REQUIRE(c.spin_levels() == 2);
    const Eigen::MatrixXcd L(build_liouvillian(c));
    const Eigen::VectorXcd ev = L.eigenvalues();
    const double kappa = c.params.kappa();
    for (int s = 0; s <= 2 * (c.fock_cutoff - 1); ++s) {
      double best = std::numeric_limits<double>::infinity();
      for (long k = 0; k < ev.size(); ++k) best = std::min(best, std::abs(ev(k) + kappa * s / 2.0));
      CHECK(best <= 1e-9 * kappa);
    }
  }

  TEST_CASE("trace functional annihilates the Liouvillian") {
    OracleConfig c;
    c.params = LambdaParams::defaults();
    c.params.omega_2 = kTwoPi * 3e3;
    c.params.J = 0.2 * c.params.kappa() / 2.0;
    c.fock_cutoff = 5;
    c.n_spins = 2;
    const SparseC L = build_liouvillian(c);
    const int d = c.hilbert_dim();
    Eigen::VectorXcd w = Eigen::VectorXcd::Zero(d * d);
    for (int i = 0; i < d; ++i) w(i * d + i) = 1.0;
    const Eigen::VectorXcd res = L.adjoint() * w;
    double scale = 0.0;
    for (int k = 0; k < L.outerSize(); ++k)
      for (SparseC::InnerIterator it(L, k); it; ++it) scale = std::max(scale, std::abs(it.value()));
    CHECK(res.cwiseAbs().maxCoeff() <= 1e-12 * scale);
  }

  TEST_CASE("symmetric thermal exchange gives flat populations") {
    OracleConfig c = two_level(3);
    c.params.g_s = 0.0;
    c.params.J = 0.0;
    c.params.gamma_p = 0.0;
    c.params.gamma_th = 500.0;
    const OracleState st = steady_state_exact(c);
    CHECK(st.rho(0, 0).real() == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(st.rho(1, 1).real() == doctest::Approx(0.5).epsilon(1e-9));
  }

  TEST_CASE("driven empty cavity is a coherent state") {
    OracleConfig c = two_level(12);
    c.params.g_s = 0.0;
    c.params.J = 0.3 * c.params.kappa() / 2.0;
    c.params.delta = kTwoPi * 0.2e6;
    const OracleState st = steady_state_exact(c);
    const cd expect = c.params.J / cd(c.params.kappa() / 2.0, c.params.delta);
    CHECK(std::abs(st.a - expect) <= 1e-8 * std::abs(expect));
    CHECK(st.cutoff_adequate);
    CHECK(st.min_eigenvalue >= -1e-8);
  }

  TEST_CASE("weak drive matches mean field") {
    OracleConfig c = two_level(8);
    c.params.J = 0.01 * c.params.kappa() / 2.0;
    const OracleComparison cmp = compare_with_mean_field(c);
    CHECK(cmp.rel_err <= 0.01);
    CHECK(cmp.cutoff_shift <= 1e-6);
  }

  TEST_CASE("mean field departs under strong drive") {
    OracleConfig c = two_level(25);
    c.params.J = 0.01 * c.params.kappa() / 2.0;
    const double weak = compare_with_mean_field(c, false).rel_err;
    for (double drive : {0.03, 0.3, 1.0}) {
      c.params.J = drive * c.params.kappa() / 2.0;
      CHECK(compare_with_mean_field(c, false).rel_err > 1.5 * weak);
    }
  }

  TEST_CASE("input checks") {
    OracleConfig c;
    c.params = LambdaParams::defaults();
    c.n_spins = 3;
    c.fock_cutoff = 30;
    REQUIRE(c.spin_levels() == 3);
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("810"), InvalidArgument);
    c.n_spins = 4;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c.n_spins = 1;
    c.params.gamma_p = -1.0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
  }

  TEST_CASE("conserved populations leave the steady state undetermined") {
    OracleConfig c = two_level(3);
    c.params.g_s = 0.0;
    c.params.J = 0.0;
    c.params.gamma_p = 0.0;
    c.params.gamma_th = 0.0;
    CHECK_THROWS_AS(steady_state_exact(c), SolverError);
  }

  TEST_CASE("transparency peak sits at two-photon resonance") {
    OracleConfig c;
    c.params = LambdaParams::defaults();
    c.params.omega_2 = kTwoPi * 6e3;
    c.params.J = 0.01 * c.params.kappa() / 2.0;
    c.fock_cutoff = 4;
    const double step = kTwoPi * 5.0;
    double best_exact = -1.0, best_mf = -1.0, at_exact = 0.0, at_mf = 0.0;
    for (int k = -60; k <= 60; ++k) {
      const double d = step * k;
      OracleConfig s = c;
      s.params.delta -= d;
      s.params.delta_s -= d;
      s.params.delta_2 -= d;
      const double ex = std::abs(steady_state_exact(s).a), mf = std::abs(mean_field_alpha(s));
      if (ex > best_exact) best_exact = ex, at_exact = d;
      if (mf > best_mf) best_mf = mf, at_mf = d;
    }
    CHECK(std::abs(at_exact - at_mf) <= c.params.Gamma_n / 2.0);
    CHECK(std::abs(at_mf) <= c.params.Gamma_n / 2.0);
  }
}
