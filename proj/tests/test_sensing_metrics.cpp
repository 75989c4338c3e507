#include <doctest.h>

#include <cstring>

#include "nvgyro/error.hpp"
#include "nvgyro/sensing_metrics.hpp"

using namespace nvgyro;

namespace {

double rad_to_mdeg(double r) { return rad_to_deg(r) * 1e3; }
double mdeg_to_rad(double m) { return m * 1e-3 * kPi / 180.0; }

}  // namespace

TEST_SUITE("sensing-metrics") {
  TEST_CASE("Johnson-Nyquist floor") {
    const NoiseModel n;
    CHECK(n.johnson_nyquist() == doctest::Approx(0.91e-9).epsilon(0.02));
    CHECK(n.density() == doctest::Approx(0.45 * n.johnson_nyquist()));
    NoiseModel bad;
    bad.xi = 1.5;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  }

  TEST_CASE("standard quantum limit") {
    CHECK(rad_to_mdeg(eta_sql(1e14, 2e-3)) == doctest::Approx(0.128).epsilon(0.01));
  }

  TEST_CASE("inverse readout fidelity") {
    const NoiseModel noise;
    const double eta = mdeg_to_rad(1.5), sql = mdeg_to_rad(0.04), t2 = 2e-3;
    const double S = kTwoPi * noise.density() / eta;
    const double N = 1.0 / (sql * sql * t2);
    const SensitivityReport r = sensitivity(S, 1e-3, noise, N, t2);
    CHECK(r.eta_mdeg == doctest::Approx(1.5));
    CHECK(r.sigma_n == doctest::Approx(37.5));
  }

  TEST_CASE("eta is linear in xi and gain-invariant") {
    NoiseModel a;
    NoiseModel b = a;
    b.xi = 1.0;
    const double S = 2e-5;
    const auto ra = sensitivity(S, 1e-3, a, 1e14, 2e-3), rb = sensitivity(S, 1e-3, b, 1e14, 2e-3);
    CHECK(rb.eta_rad / ra.eta_rad == doctest::Approx(1.0 / 0.45));

    NoiseModel c = a;
    c.temperature *= 9.0;  // triples L
    const auto rc = sensitivity(3.0 * S, 3e-3, c, 1e14, 2e-3);
    CHECK(rc.eta_rad == doctest::Approx(ra.eta_rad).epsilon(1e-12));
    CHECK_THROWS_AS(sensitivity(0.0, 1e-3, a, 1e14, 2e-3), SolverError);
  }

  TEST_CASE("far-detuned probe carries no signal") {
    LambdaParams p = LambdaParams::defaults();
    p.omega_2 = kTwoPi * 3e3;
    const double far = kTwoPi * 50e6;
    p.delta_s = far;
    const auto s_far = signal_slope(p.ensemble());
    p.delta_s = 0.0;
    const auto s_res = signal_slope(p.ensemble());
    CHECK(std::abs(s_far.dim_r) < 1e-4 * std::abs(s_res.dim_r));
  }

  TEST_CASE("difference-mode paths agree") {
    LambdaParams p = LambdaParams::defaults();
    p.omega_2 = kTwoPi * 3e3;
    SlopeOptions a, b;
    b.path = ShiftPath::LevelEnergies;
    const double sa = signal_slope(p.ensemble(), a).dim_r, sb = signal_slope(p.ensemble(), b).dim_r;
    CHECK(sb == doctest::Approx(sa).epsilon(1e-6));
  }

  TEST_CASE("undriven row has no MWI or oscillation") {
    const LambdaParams p = LambdaParams::defaults();
    const SweepResult r = sweep_power_drive(p, {-90.0, -70.0, -55.0, -40.0}, {0.0}, SweepSettings{});
    // Without Omega_2 there is no difference-mode slope, so eta is undefined and
    // the cell is flagged; the regime is still classified.
    for (const auto& c : r.cells) {
      CHECK(c.regime == Regime::EIT);
      CHECK(c.S == 0.0);
    }
  }

  TEST_CASE("parallel sweep equals the serial reference") {
    const LambdaParams p = LambdaParams::defaults();
    std::vector<double> P, O;
    for (int i = 0; i < 6; ++i) P.push_back(-80.0 + 8.0 * i);
    for (int j = 0; j < 6; ++j) O.push_back(kTwoPi * 300.0 * std::pow(2.0, j));
    SweepSettings s;
    s.workers = 4;
    const SweepResult a = sweep_power_drive(p, P, O, s), b = sweep_power_drive_serial(p, P, O, s);
    REQUIRE(a.cells.size() == b.cells.size());
    for (std::size_t k = 0; k < a.cells.size(); ++k) {
      CHECK(a.cells[k].regime == b.cells[k].regime);
      CHECK(a.cells[k].ok == b.cells[k].ok);
      CHECK(std::memcmp(&a.cells[k].S, &b.cells[k].S, sizeof(double)) == 0);
      CHECK(std::memcmp(&a.cells[k].alpha0, &b.cells[k].alpha0, sizeof(cd)) == 0);
    }
    CHECK(a.argmin == b.argmin);
    for (const auto& c : a.cells)
      if (c.ok && c.regime != Regime::Oscillation) CHECK(c.sigma_n >= 1.0);
  }

  TEST_CASE("sweep grids must be sorted") {
    CHECK_THROWS_AS(sweep_power_drive(LambdaParams::defaults(), {-50.0, -60.0}, {1e3}, SweepSettings{}),
                    InvalidArgument);
  }

  TEST_CASE("log-log slope") {
    std::vector<double> x, y;
    for (double c : {1.0, 2.0, 4.0, 8.0}) {
      x.push_back(c);
      y.push_back(3.0 / c);
    }
    CHECK(loglog_slope(x, y) == doctest::Approx(-1.0));
  }
}
