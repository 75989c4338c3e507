#include <doctest.h>

#include <random>

#include "nvgyro/error.hpp"
#include "nvgyro/lambda_dynamics.hpp"

using namespace nvgyro;

namespace {

// Both lower levels exchange nothing: at Omega_2 = 0 the spin is a two-level system.
LambdaParams closed(LambdaParams p) {
  p.repump_to_2 = 0.0;
  p.nuclear_flip_fraction = 0.0;
  return p;
}

Eigen::Matrix3cd random_density(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::Matrix3cd A;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) A(i, j) = {g(rng), g(rng)};
  Eigen::Matrix3cd rho = A * A.adjoint();
  return rho / rho.trace();
}

}  // namespace

TEST_SUITE("lambda-dynamics") {
  TEST_CASE("empty cavity follows the Lorentzian") {
    LambdaParams p = LambdaParams::defaults();
    p.g_s = 0.0;
    for (double d : {0.0, kTwoPi * 0.3e6, -kTwoPi * 2e6}) {
      p.delta = d;
      const auto sol = solve_steady_state(p);
      const cd expect = p.J / cd(p.kappa() / 2.0, d);
      CHECK(std::abs(sol.state.alpha - expect) <= 1e-10 * std::abs(expect));
      if (d == 0.0) {
        CHECK(std::abs(sol.alpha0 - 1.0) < 1e-10);
        CHECK(std::abs(sol.r) < 1e-10);
      }
    }
  }

  TEST_CASE("equations of motion preserve trace and hermiticity") {
    std::mt19937_64 rng(3);
    LambdaParams p = LambdaParams::defaults();
    p.omega_2 = kTwoPi * 5e3;
    p.delta_2 = kTwoPi * 40.0;
    for (int trial = 0; trial < 10; ++trial) {
      SystemState s;
      s.alpha = {1e3 * trial, -2e3};
      s.rho = {random_density(rng)};
      const SystemState d = equations_of_motion(p, s);
      const double scale = d.rho[0].norm();
      CHECK(std::abs(d.rho[0].trace()) <= 1e-12 * scale);
      CHECK((d.rho[0] - d.rho[0].adjoint()).norm() <= 1e-12 * scale);
    }
  }

  TEST_CASE("rate bookkeeping") {
    SpinParams s = LambdaParams::defaults().spin();
    CHECK(s.out_rate_e() == doctest::Approx(s.gamma_p + s.gamma_th));
    CHECK(s.out_rate_1() == doctest::Approx(s.gamma_th + s.nuclear_flip_fraction * s.gamma_n / 2.0));
    CHECK(s.pure_dephasing() == doctest::Approx((s.gamma - s.out_rate_1() - s.out_rate_e()) / 2.0));
    CHECK_FALSE(s.level2_decoupled());
    s.omega_2 = 0.0;
    s.repump_to_2 = 0.0;
    s.nuclear_flip_fraction = 0.0;
    CHECK(s.level2_decoupled());
  }

  TEST_CASE("cooperativity set and read back") {
    LambdaParams p = LambdaParams::defaults();
    p.set_cooperativity(7.5);
    CHECK(p.cooperativity() == doctest::Approx(7.5));
    CHECK(p.kappa() == doctest::Approx(p.kappa_c + p.kappa_c1));
  }

  TEST_CASE("two-level suppression by 1/(1+C)") {
    for (double P : {-80.0, -55.0}) {
      LambdaParams p = closed(LambdaParams::defaults());
      p.J = power_to_drive(P, p.kappa_c1);
      const auto sol = solve_steady_state(p);
      const double empty = p.J / (p.kappa() / 2.0);
      CHECK(std::abs(sol.state.alpha) == doctest::Approx(empty / (1.0 + p.cooperativity())).epsilon(0.05));
    }
  }

  TEST_CASE("steady state satisfies the cavity relation") {
    LambdaParams p = LambdaParams::defaults();
    p.omega_2 = kTwoPi * 3e3;
    const auto sol = solve_steady_state(p);
    const cd rhs = (p.J - cd(0, 1) * p.g_s * p.N * sol.state.rho[0](2, 0)) / cd(p.kappa() / 2.0, p.delta);
    CHECK(std::abs(sol.state.alpha - rhs) <= 1e-9 * std::abs(sol.state.alpha));
    const Eigen::Matrix3cd& rho = sol.state.rho[0];
    CHECK(std::abs(rho.trace() - 1.0) < 1e-12);
    CHECK((rho - rho.adjoint()).norm() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3cd> es(rho);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);
  }

  TEST_CASE("integration converges to the steady state") {
    LambdaParams p = closed(LambdaParams::defaults());
    const auto sol = solve_steady_state(p);
    REQUIRE(sol.regime != Regime::Oscillation);
    IntegrateOptions io;
    io.sample_dt = 1e-4;
    io.keep_states = false;
    io.detect_beat = false;
    io.rtol = 1e-11;
    io.atol = 1e-11;
    const TimeTrace tr = integrate(p, MeanFieldModel(p.ensemble()).ground_state(), 0.01, io);
    const double a_end = std::abs(tr.alpha.back());
    CHECK(std::abs(a_end - std::abs(sol.state.alpha)) <= 1e-8 * std::abs(sol.state.alpha));
  }

  TEST_CASE("undriven lambda system is never MWI") {
    LambdaParams p = LambdaParams::defaults();
    for (double P : {-90.0, -70.0, -55.0, -40.0}) {
      p.J = power_to_drive(P, p.kappa_c1);
      const auto sol = solve_steady_state(p);
      CHECK(sol.regime == Regime::EIT);
      CHECK(sol.state.rho[0](2, 0).imag() < 0.0);
    }
  }

  TEST_CASE("regime rule") {
    Eigen::VectorXcd stable(2), unstable(2);
    stable << cd(-1.0, 0.0), cd(-2.0, 3.0);
    unstable << cd(-1.0, 0.0), cd(0.5, 3.0);
    const cd ref(0.0, -1.0);
    CHECK(classify(unstable, 1e-9, 0.1, cd(0, -0.5), ref, 1e-2) == Regime::Oscillation);
    CHECK(classify(stable, 1e-9, 1.5, cd(0, -0.5), ref, 1e-2) == Regime::Oscillation);
    CHECK(classify(stable, 1e-9, 0.1, cd(0.3, -1e-3), ref, 1e-2) == Regime::PerfectEIT);
    CHECK(classify(stable, 1e-9, 0.1, cd(0, -0.5), ref, 1e-2) == Regime::EIT);
    CHECK(classify(stable, 1e-9, 0.1, cd(0, 0.5), ref, 1e-2) == Regime::MWI);
  }

  TEST_CASE("perfect EIT root") {
    LambdaParams p = LambdaParams::defaults();
    const PerfectEitPoint pt = perfect_eit_point(p);
    REQUIRE(pt.found);
    CHECK(std::abs(pt.im_rho_e1) <= 1e-3 * pt.ref_abs);
  }

  TEST_CASE("perfect EIT drive grows with power above -55 dBm") {
    const auto curve = perfect_eit_curve(LambdaParams::defaults(), {-55.0, -50.0, -45.0});
    for (const auto& pt : curve) REQUIRE(pt.found);
    CHECK(curve[1].omega_2 > curve[0].omega_2);
    CHECK(curve[2].omega_2 > curve[1].omega_2);
  }

  TEST_CASE("narrow transmission feature at two-photon resonance") {
    LambdaParams p = LambdaParams::defaults();
    p.omega_2 = kTwoPi * 6e3;
    std::vector<double> offsets;
    for (int k = -100; k <= 100; ++k) offsets.push_back(kTwoPi * 10.0 * k);
    const auto scan = probe_spectrum(p, offsets);
    const EitFeature f = eit_feature(scan);
    REQUIRE(f.found);
    CHECK(scan[f.center].probe_offset == 0.0);
    CHECK(f.contrast > 3.0);
    CHECK(f.fwhm < 10.0 * p.Gamma_n);
  }

  TEST_CASE("power conversion") {
    const double k = kTwoPi * 0.5e6;
    // sqrt(kappa_c1 P / (hbar omega_d)) at -55 dBm and 2.87 GHz.
    CHECK(power_to_drive(-55.0, k) == doctest::Approx(72277974483.03886).epsilon(1e-12));
    CHECK(power_to_drive(-45.0, k) / power_to_drive(-55.0, k) == doctest::Approx(std::sqrt(10.0)));
    CHECK(power_to_drive(-std::numeric_limits<double>::infinity(), k) == 0.0);
    CHECK(drive_to_watt(power_to_drive(-55.0, k), k) == doctest::Approx(dbm_to_watt(-55.0)));
  }
}
