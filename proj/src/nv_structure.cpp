#include "nvgyro/nv_structure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "nvgyro/error.hpp"

namespace nvgyro {
namespace {

using cd = std::complex<double>;
using Matrix3c = Eigen::Matrix3cd;

// Spin-1 matrices on the ordered basis m = -1, 0, +1.
Matrix3c spin1(char axis) {
  const double s = 1.0 / std::sqrt(2.0);
  Matrix3c m = Matrix3c::Zero();
  switch (axis) {
    case 'x':
      m(0, 1) = m(1, 0) = m(1, 2) = m(2, 1) = s;
      break;
    case 'y':
      // S_y = (S+ - S-)/2i; <m+1|S+|m> = sqrt(2)
      m(1, 0) = cd(0, s);
      m(0, 1) = cd(0, -s);
      m(2, 1) = cd(0, s);
      m(1, 2) = cd(0, -s);
      break;
    case 'z':
      m(0, 0) = -1.0;
      m(2, 2) = 1.0;
      break;
    default:
      throw InvalidArgument(std::string("unknown spin axis '") + axis + "'");
  }
  return m;
}

Matrix9cd kron(const Matrix3c& a, const Matrix3c& b) {
  Matrix9cd out;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out.block<3, 3>(3 * i, 3 * j) = a(i, j) * b;
  return out;
}

}  // namespace

std::string StateLabel::str() const {
  auto sign = [](int m) { return m > 0 ? std::string("+") + std::to_string(m) : std::to_string(m); };
  return "|" + sign(m_s) + "," + sign(m_i) + ">";
}

Matrix9cd electron_op(char axis) { return kron(spin1(axis), Matrix3c::Identity()); }
Matrix9cd nuclear_op(char axis) { return kron(Matrix3c::Identity(), spin1(axis)); }

Matrix9cd build_hamiltonian(const NVParams& p, const MagneticField& f) {
  const Eigen::Vector3d& B = f.b_gauss;
  if (!B.allFinite()) throw InvalidArgument("magnetic field has non-finite components");
  const Matrix9cd Sx = electron_op('x'), Sy = electron_op('y'), Sz = electron_op('z');
  const Matrix9cd Ix = nuclear_op('x'), Iy = nuclear_op('y'), Iz = nuclear_op('z');
  const double ge = p.gamma_e / kTwoPi;  // Hz/G
  const double gn = p.gamma_n / kTwoPi;

  Matrix9cd H = p.D * Sz * Sz + p.Q * Iz * Iz;
  H += ge * (B.x() * Sx + B.y() * Sy + B.z() * Sz);
  H -= gn * (B.x() * Ix + B.y() * Iy + B.z() * Iz);
  H += p.A_par * Sz * Iz + p.A_perp * (Sx * Ix + Sy * Iy);
  // Products of the Pauli-like matrices leave ~1e-16 anti-Hermitian dust.
  return 0.5 * (H + H.adjoint());
}

LevelSet eigensystem(const Matrix9cd& H) {
  const double scale = std::max(H.norm(), 1e-300);
  const double asym = (H - H.adjoint()).norm();
  if (asym > 1e-12 * scale) {
    std::ostringstream os;
    os << "eigensystem: input not Hermitian (|H - H^dag| / |H| = " << asym / scale << ")";
    throw InvalidArgument(os.str());
  }

  // Connected components of the coupling graph.
  std::array<int, 9> comp;
  comp.fill(-1);
  int ncomp = 0;
  for (int s = 0; s < 9; ++s) {
    if (comp[s] >= 0) continue;
    std::vector<int> stack{s};
    comp[s] = ncomp;
    while (!stack.empty()) {
      int i = stack.back();
      stack.pop_back();
      for (int j = 0; j < 9; ++j)
        if (comp[j] < 0 && H(i, j) != cd(0.0)) {
          comp[j] = ncomp;
          stack.push_back(j);
        }
    }
    ++ncomp;
  }

  std::vector<double> evals;
  std::vector<Vector9cd> evecs;
  for (int c = 0; c < ncomp; ++c) {
    std::vector<int> idx;
    for (int i = 0; i < 9; ++i)
      if (comp[i] == c) idx.push_back(i);
    const int n = static_cast<int>(idx.size());
    Eigen::MatrixXcd block(n, n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) block(a, b) = H(idx[a], idx[b]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(block);
    for (int k = 0; k < n; ++k) {
      Vector9cd v = Vector9cd::Zero();
      for (int a = 0; a < n; ++a) v(idx[a]) = es.eigenvectors()(a, k);
      // Fix the global phase: largest component real and positive.
      int imax = 0;
      v.cwiseAbs().maxCoeff(&imax);
      v *= std::conj(v(imax)) / std::abs(v(imax));
      evals.push_back(es.eigenvalues()(k));
      evecs.push_back(v);
    }
  }

  std::array<int, 9> order;
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return evals[a] < evals[b]; });

  LevelSet out;
  for (int k = 0; k < 9; ++k) {
    out.energies(k) = evals[order[k]];
    out.states.col(k) = evecs[order[k]];
    const Vector9d w = out.states.col(k).cwiseAbs2();
    int best = 0;
    for (int i = 1; i < 9; ++i)
      if (w(i) > w(best)) best = i;  // strict: ties keep the lower index
    out.labels[k] = StateLabel{best / 3 - 1, best % 3 - 1, w(best)};
  }
  return out;
}

LambdaExtraction extract_lambda(const LevelSet& levels) {
  const std::array<int, 3> targets{basis_index(0, -1), basis_index(0, 0), basis_index(1, -1)};
  const char* names[3] = {"|1> = |0,-1>", "|2> = |0,0>", "|e> = |+1,-1>"};
  LambdaExtraction out;
  for (int t = 0; t < 3; ++t) {
    int best = 0;
    double wbest = -1.0;
    for (int k = 0; k < 9; ++k) {
      const double w = std::norm(levels.states(targets[t], k));
      if (w > wbest) {
        wbest = w;
        best = k;
      }
    }
    if (wbest <= 0.5) {
      std::ostringstream os;
      os << "excessive state mixing: best overlap for " << names[t] << " is " << wbest;
      throw SolverError(SolverError::Kind::Mixing, os.str());
    }
    out.index[t] = best;
    out.overlap[t] = wbest;
  }
  const auto& E = levels.energies;
  const int i1 = out.index[0], i2 = out.index[1], ie = out.index[2];
  out.omega_s = E(ie) - E(i1);
  out.omega_2e = E(ie) - E(i2);
  out.q_eff = E(i2) - E(i1);

  const Matrix9cd Sx = electron_op('x');
  const double ref = 1.0 / std::sqrt(2.0);
  const auto& V = levels.states;
  out.c_allowed = std::abs(V.col(ie).dot(Sx * V.col(i1))) / ref;
  out.c_forbidden = std::abs(V.col(ie).dot(Sx * V.col(i2))) / ref;
  return out;
}

RotationSignalShift rotation_shift(const Eigen::Vector3d& rate, const Eigen::Vector3d& nv_axis) {
  if (!nv_axis.allFinite() || std::abs(nv_axis.norm() - 1.0) > 1e-9)
    throw InvalidArgument("rotation_shift: nv_axis must be a unit vector");
  const double rz = rate.dot(nv_axis);
  // m_I(|1>) - m_I(|2>) = -1; |e> shares m_I = -1 with |1>.
  return RotationSignalShift{rz, -rz};
}

std::array<Eigen::Vector3d, 4> tetrahedral_axes() {
  const double s = 1.0 / std::sqrt(3.0);
  return {Eigen::Vector3d(s, s, s), Eigen::Vector3d(s, -s, -s), Eigen::Vector3d(-s, s, -s),
          Eigen::Vector3d(-s, -s, s)};
}

}  // namespace nvgyro
