#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <string>

#include "nvgyro/constants.hpp"

namespace nvgyro {

using Matrix9cd = Eigen::Matrix<std::complex<double>, 9, 9>;
using Vector9cd = Eigen::Matrix<std::complex<double>, 9, 1>;
using Vector9d = Eigen::Matrix<double, 9, 1>;

/// Ground-state NV and 14N constants. Splittings in Hz, gyromagnetic ratios in rad/s/G.
struct NVParams {
  double D = 2.87e9;
  double Q = -4.945e6;
  double gamma_e = kTwoPi * 2.8e6;
  double gamma_n = kTwoPi * 307.7;
  double A_par = -2.16e6;
  double A_perp = -2.7e6;
};

/// Bias field in gauss, NV frame (z along the NV axis).
struct MagneticField {
  Eigen::Vector3d b_gauss = Eigen::Vector3d(50.0, 0.0, 50.0);
  double transverse() const { return std::hypot(b_gauss.x(), b_gauss.y()); }
};

/// Dominant product-basis character of an eigenstate.
struct StateLabel {
  int m_s = 0;
  int m_i = 0;
  double overlap = 0.0;
  std::string str() const;
};

struct LevelSet {
  Vector9d energies;  // Hz, ascending
  Matrix9cd states;   // columns are eigenvectors
  std::array<StateLabel, 9> labels;
};

/// Transition data for the Λ system |1> = |0,-1>, |2> = |0,0>, |e> = |+1,-1>.
struct LambdaExtraction {
  double omega_s = 0.0;   // Hz, |1> <-> |e>
  double omega_2e = 0.0;  // Hz, |2> <-> |e>
  double q_eff = 0.0;     // Hz, |2> - |1>
  double c_allowed = 0.0;
  double c_forbidden = 0.0;
  std::array<int, 3> index{};  // eigenstate indices of |1>, |2>, |e>
  std::array<double, 3> overlap{};
};

struct RotationSignalShift {
  double delta_C = 0.0;  // rad/s
  double delta_D = 0.0;  // rad/s
};

/// Product-basis index of |m_s, m_I>, both in {-1, 0, 1}.
constexpr int basis_index(int m_s, int m_i) { return 3 * (m_s + 1) + (m_i + 1); }

/// Electron spin operators lifted to the 9-dimensional space (S_k ⊗ 1).
Matrix9cd electron_op(char axis);
/// Nuclear spin operators lifted to the 9-dimensional space (1 ⊗ I_k).
Matrix9cd nuclear_op(char axis);

Matrix9cd build_hamiltonian(const NVParams& params, const MagneticField& field);

/// Hermitian eigendecomposition. Blocks that the off-diagonal pattern leaves
/// disconnected are diagonalized separately, so exact selection rules survive.
LevelSet eigensystem(const Matrix9cd& H);

LambdaExtraction extract_lambda(const LevelSet& levels);

RotationSignalShift rotation_shift(const Eigen::Vector3d& rate, const Eigen::Vector3d& nv_axis);

std::array<Eigen::Vector3d, 4> tetrahedral_axes();

}  // namespace nvgyro
