#include <doctest.h>

#include "nvgyro/error.hpp"
#include "nvgyro/multi_ensemble.hpp"

using namespace nvgyro;

namespace {

std::vector<Eigen::Vector3d> tetra() {
  const auto a = tetrahedral_axes();
  return {a.begin(), a.end()};
}

}  // namespace

TEST_SUITE("multi-ensemble") {
  TEST_CASE("one member reduces to the single-ensemble solver") {
    LambdaParams p = LambdaParams::defaults();
    p.omega_2 = kTwoPi * 3e3;
    const auto a = solve_steady_state(p);
    const auto b = solve_multi_steady_state(p.ensemble());
    CHECK(std::abs(a.state.alpha - b.state.alpha) <= 1e-12 * std::abs(a.state.alpha));
    CHECK((a.state.rho[0] - b.state.rho[0]).norm() <= 1e-12);
  }

  TEST_CASE("comag layout") {
    const LambdaParams p = LambdaParams::defaults();
    const EnsembleSet set = comag_set(p, 0.0);
    REQUIRE(set.members.size() == 3);
    // 1+ and 2+ share the |0,-1> + |0,0> spins; each transition holds N/2 at equal populations.
    CHECK(set.members[0].spin.n_spins == doctest::Approx(p.N));
    REQUIRE(set.members[1].link.has_value());
    CHECK(set.members[1].link->total_spins == doctest::Approx(p.N));
    const auto& s3 = set.members[2].spin;
    CHECK(4.0 * s3.g_s * s3.g_s * s3.n_spins / (p.kappa() * s3.gamma) == doctest::Approx(p.cooperativity() / 2.0));
  }

  TEST_CASE("second tone on an empty cavity is the shifted Lorentzian") {
    LambdaParams p = LambdaParams::defaults();
    p.g_s = 0.0;
    p.delta = kTwoPi * 0.1e6;
    const EnsembleSet set = p.ensemble();
    const auto op = solve_steady_state(set);
    const std::vector<double> ds{-kTwoPi * 1e6, -kTwoPi * 0.2e6, kTwoPi * 0.4e6};
    const auto resp = second_tone_response(set, op, ds, -60.0);
    for (std::size_t k = 0; k < ds.size(); ++k) {
      const cd expect = -1.0 + p.kappa_c1 / cd(p.kappa() / 2.0, p.delta - ds[k]);
      CHECK(std::abs(resp.r2[k] - expect) < 1e-10);
    }
  }

  TEST_CASE("linear response agrees with two-tone integration") {
    LambdaParams p = LambdaParams::defaults();
    p.omega_2 = kTwoPi * 3e3;
    const EnsembleSet set = p.ensemble();
    const auto op = solve_steady_state(set);
    REQUIRE(op.regime != Regime::Oscillation);
    const std::vector<double> ds{-kTwoPi * 0.3e6, kTwoPi * 0.05e6, kTwoPi * 0.6e6};
    const double J2 = p.J / 100.0;
    const double p2 = 10.0 * std::log10(drive_to_watt(J2, p.kappa_c1) * 1e3);
    const auto lr = second_tone_response(set, op, ds, p2);
    for (std::size_t k = 0; k < ds.size(); ++k) {
      const cd td = two_tone_time_domain(set, op, ds[k], J2);
      CHECK(std::abs(td - lr.r2[k]) <= 0.02 * std::abs(lr.r2[k]));
    }
  }

  TEST_CASE("crosstalk decays with member separation") {
    LambdaParams p = LambdaParams::defaults();
    p.omega_2 = kTwoPi * 3e3;
    double last = std::numeric_limits<double>::infinity();
    for (double s : {0.8e6, 1.6e6, 3.2e6}) {
      const CrosstalkMatrix X = crosstalk_matrix(p, {0.0, kTwoPi * s});
      const double ratio = std::abs(X.M(0, 1) / X.M(0, 0));
      CHECK(ratio < last);
      CHECK(X.diagonally_dominant());
      last = ratio;
    }
  }

  TEST_CASE("noiseless reconstruction is exact") {
    const auto axes = tetra();
    for (const Eigen::Vector3d& R : {Eigen::Vector3d(0.3, -0.2, 0.5), Eigen::Vector3d(-1.0, 2.0, 0.1)}) {
      const Eigen::Vector3d back = reconstruct_rotation(project_rotation(R, axes), axes);
      CHECK((back - R).norm() <= 1e-9 * R.norm());
    }
  }

  TEST_CASE("reconstruction with a known crosstalk matrix") {
    const auto axes = tetra();
    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(4, 4);
    M(0, 1) = 0.1;
    M(2, 3) = -0.05;
    M(3, 2) = 0.08;
    const Eigen::Vector3d R(0.4, 0.1, -0.3);
    const auto d = project_rotation(R, axes);
    const Eigen::VectorXd s = M * Eigen::Map<const Eigen::VectorXd>(d.data(), 4);
    std::vector<double> y(4);
    for (int i = 0; i < 4; ++i) y[static_cast<std::size_t>(i)] = s(i) / M(i, i);
    CHECK((reconstruct_rotation(y, axes, M) - R).norm() <= 1e-12);
    CHECK((reconstruct_rotation(y, axes) - R).norm() > 1e-3);
  }

  TEST_CASE("degenerate geometry and crosstalk are refused") {
    const std::vector<Eigen::Vector3d> flat{Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY(),
                                            Eigen::Vector3d(1, 1, 0).normalized()};
    CHECK_THROWS_AS(reconstruct_rotation({1.0, 2.0, 3.0}, flat), SolverError);

    const auto axes = tetra();
    Eigen::MatrixXd M = Eigen::MatrixXd::Ones(4, 4);
    CHECK_THROWS_AS(reconstruct_rotation({1.0, 1.0, 1.0, 1.0}, axes, M), SolverError);
  }

  TEST_CASE("comagnetometer correction") {
    const NVParams nv;
    CHECK(comagnetometer_correct(0.37, 0.0, nv) == 0.37);
    const double bz = 0.2;
    CHECK(std::abs(comagnetometer_correct(nv.gamma_n * bz, nv.gamma_e * bz, nv)) < 1e-12);
    const double rot = 0.05;
    CHECK(std::abs(comagnetometer_correct(rot + nv.gamma_n * bz, nv.gamma_e * bz, nv) - rot) < 1e-12);
  }

  TEST_CASE("auxiliary tone degradation") {
    LambdaParams p = LambdaParams::defaults();
    p.omega_2 = kTwoPi * 3e3;
    const EnsembleSet set = comag_set(p, 0.0);
    CHECK(eit_degradation(set, 0.0, -kTwoPi * 4.7e6) == 0.0);
    CHECK_THROWS_AS(eit_degradation(set, kTwoPi * 1e3, 0.0), InvalidArgument);

    double last = 0.0;
    for (double omega_r : {1e3, 2e3, 4e3, 8e3}) {
      const double d = std::abs(eit_degradation(set, kTwoPi * omega_r, kTwoPi * 2e4));
      CHECK(d > last);
      last = d;
    }
  }
}
