#include <doctest.h>

#include <algorithm>
#include <random>

#include "nvgyro/error.hpp"
#include "nvgyro/nv_structure.hpp"

using namespace nvgyro;

namespace {

NVParams no_hyperfine() {
  NVParams p;
  p.A_par = 0.0;
  p.A_perp = 0.0;
  return p;
}

MagneticField field(double bx, double by, double bz) {
  MagneticField f;
  f.b_gauss = Eigen::Vector3d(bx, by, bz);
  return f;
}

}  // namespace

TEST_SUITE("nv-structure") {
  TEST_CASE("zero field without hyperfine is diagonal") {
    const NVParams p = no_hyperfine();
    const Matrix9cd H = build_hamiltonian(p, field(0, 0, 0));
    for (int ms = -1; ms <= 1; ++ms)
      for (int mi = -1; mi <= 1; ++mi) {
        const int k = basis_index(ms, mi);
        CHECK(H(k, k).real() == doctest::Approx(p.D * ms * ms + p.Q * mi * mi));
      }
    Matrix9cd off = H;
    off.diagonal().setZero();
    CHECK(off.norm() == 0.0);
  }

  TEST_CASE("hamiltonian is hermitian") {
    const Matrix9cd H = build_hamiltonian(NVParams{}, field(50, 20, 50));
    CHECK((H - H.adjoint()).norm() <= 1e-12 * H.norm());
  }

  TEST_CASE("axial Zeeman shift is diagonal in m_s") {
    const NVParams p = no_hyperfine();
    const Matrix9cd H0 = build_hamiltonian(p, field(0, 0, 0));
    const Matrix9cd H1 = build_hamiltonian(p, field(0, 0, 100));
    const double ge = p.gamma_e / kTwoPi, gn = p.gamma_n / kTwoPi;
    for (int ms = -1; ms <= 1; ++ms)
      for (int mi = -1; mi <= 1; ++mi) {
        const int k = basis_index(ms, mi);
        const double shift = (H1(k, k) - H0(k, k)).real();
        CHECK(shift == doctest::Approx(ge * 100.0 * ms - gn * 100.0 * mi).epsilon(1e-12));
      }
  }

  TEST_CASE("zero-field hyperfine cross term") {
    NVParams p;
    p.A_perp = 0.0;
    const LevelSet L = eigensystem(build_hamiltonian(p, field(0, 0, 0)));
    std::vector<double> expect;
    for (int ms = -1; ms <= 1; ++ms)
      for (int mi = -1; mi <= 1; ++mi) expect.push_back(p.D * ms * ms + p.Q * mi * mi + p.A_par * ms * mi);
    std::sort(expect.begin(), expect.end());
    for (int i = 0; i < 9; ++i) CHECK(L.energies(i) == doctest::Approx(expect[static_cast<std::size_t>(i)]));
  }

  TEST_CASE("diagonal input gives identity eigenvectors") {
    Matrix9cd H = Matrix9cd::Zero();
    for (int i = 0; i < 9; ++i) H(i, i) = 10.0 * i - 3.0;
    const LevelSet L = eigensystem(H);
    for (int i = 0; i < 9; ++i) CHECK(L.energies(i) == doctest::Approx(10.0 * i - 3.0));
    CHECK((L.states.cwiseAbs() - Matrix9cd::Identity().cwiseAbs()).norm() < 1e-12);
  }

  TEST_CASE("random hermitian matrices diagonalize") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 20; ++trial) {
      Matrix9cd A;
      for (int i = 0; i < 9; ++i)
        for (int j = 0; j < 9; ++j) A(i, j) = {g(rng), g(rng)};
      const Matrix9cd H = A + A.adjoint();
      const LevelSet L = eigensystem(H);
      const Matrix9cd D = L.states.adjoint() * H * L.states;
      Matrix9cd off = D;
      off.diagonal().setZero();
      CHECK(off.norm() <= 1e-9 * H.norm());
      CHECK((L.states.adjoint() * L.states - Matrix9cd::Identity()).norm() < 1e-12);
      for (int i = 1; i < 9; ++i) CHECK(L.energies(i) >= L.energies(i - 1));
    }
  }

  TEST_CASE("non-hermitian input is rejected") {
    Matrix9cd H = Matrix9cd::Identity();
    H(0, 1) = 1.0;
    CHECK_THROWS_AS(eigensystem(H), InvalidArgument);
  }

  TEST_CASE("default field residuals and labels") {
    const Matrix9cd H = build_hamiltonian(NVParams{}, MagneticField{});
    const LevelSet L = eigensystem(H);
    for (int i = 0; i < 9; ++i) {
      const Vector9cd v = L.states.col(i);
      CHECK((H * v - L.energies(i) * v).norm() <= 1e-9 * H.norm());
      CHECK(L.labels[static_cast<std::size_t>(i)].overlap > 0.5);
    }
  }

  TEST_CASE("lambda extraction at zero and axial field") {
    // At B = 0, |+1,-1> and |-1,+1> are degenerate and A_perp mixes them, so the
    // zero-field check runs without the transverse hyperfine term.
    NVParams p;
    p.A_perp = 0.0;
    const LambdaExtraction z = extract_lambda(eigensystem(build_hamiltonian(p, field(0, 0, 0))));
    CHECK(z.c_forbidden == 0.0);
    CHECK(z.q_eff == doctest::Approx(std::abs(p.Q)));

    const LambdaExtraction a = extract_lambda(eigensystem(build_hamiltonian(NVParams{}, field(0, 0, 80))));
    CHECK(a.c_forbidden == 0.0);
    CHECK(a.c_allowed > 0.5);
    CHECK(a.c_allowed <= 1.1);
  }

  TEST_CASE("forbidden coupling grows with transverse field") {
    double last = -1.0;
    for (double bt = 0.0; bt <= 80.0; bt += 10.0) {
      const LambdaExtraction x = extract_lambda(eigensystem(build_hamiltonian(NVParams{}, field(bt, 0, 50))));
      if (bt == 0.0)
        CHECK(x.c_forbidden == 0.0);
      else
        CHECK(x.c_forbidden > last);
      last = x.c_forbidden;
    }
  }

  TEST_CASE("Hellmann-Feynman slope matches finite difference") {
    const NVParams p;
    const double bz = 50.0, h = 1e-2;
    const LevelSet L = eigensystem(build_hamiltonian(p, field(30, 0, bz)));
    const LevelSet Lp = eigensystem(build_hamiltonian(p, field(30, 0, bz + h)));
    const LevelSet Lm = eigensystem(build_hamiltonian(p, field(30, 0, bz - h)));
    const Matrix9cd dH = (p.gamma_e / kTwoPi) * electron_op('z') - (p.gamma_n / kTwoPi) * nuclear_op('z');
    for (int i = 0; i < 9; ++i) {
      const Vector9cd v = L.states.col(i);
      const double hf = (v.adjoint() * dH * v)(0).real();
      const double fd = (Lp.energies(i) - Lm.energies(i)) / (2.0 * h);
      CHECK(std::abs(fd - hf) <= 1e-6 * std::abs(hf) + 1e-3);
    }
  }

  TEST_CASE("rotation shift") {
    const Eigen::Vector3d z = Eigen::Vector3d::UnitZ();
    const auto zero = rotation_shift(Eigen::Vector3d::Zero(), z);
    CHECK(zero.delta_C == 0.0);
    CHECK(zero.delta_D == 0.0);

    const auto one = rotation_shift(z, z);
    CHECK(std::abs(one.delta_C) == doctest::Approx(1.0));
    CHECK(std::abs(one.delta_D) == doctest::Approx(1.0));

    const auto perp = rotation_shift(Eigen::Vector3d::UnitX(), z);
    CHECK(perp.delta_C == 0.0);
    CHECK(perp.delta_D == 0.0);

    const Eigen::Vector3d axis = Eigen::Vector3d(1, 1, 1).normalized();
    const Eigen::Vector3d r1(0.3, -1.2, 0.7), r2(-2.0, 0.1, 0.4);
    const auto s1 = rotation_shift(r1, axis), s2 = rotation_shift(r2, axis), s = rotation_shift(r1 + r2, axis);
    CHECK(s.delta_D == doctest::Approx(s1.delta_D + s2.delta_D).epsilon(1e-14));
    CHECK(s.delta_C == doctest::Approx(s1.delta_C + s2.delta_C).epsilon(1e-14));

    CHECK_THROWS_AS(rotation_shift(z, Eigen::Vector3d(0, 0, 2)), InvalidArgument);
  }

  TEST_CASE("tetrahedral axes") {
    const auto ax = tetrahedral_axes();
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(ax[i].norm() == doctest::Approx(1.0));
      sum += ax[i];
      for (std::size_t j = i + 1; j < 4; ++j) CHECK(ax[i].dot(ax[j]) == doctest::Approx(-1.0 / 3.0));
    }
    CHECK(sum.norm() < 1e-15);
  }
}
