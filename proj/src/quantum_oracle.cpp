#include "nvgyro/quantum_oracle.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "nvgyro/error.hpp"

namespace nvgyro {
namespace {

constexpr int kMaxHilbert = 800;
constexpr int kDenseBelow = 200;

SparseC identity(int n) {
  SparseC I(n, n);
  I.setIdentity();
  return I;
}

SparseC kron(const SparseC& A, const SparseC& B) {
  SparseC out(A.rows() * B.rows(), A.cols() * B.cols());
  std::vector<Eigen::Triplet<cd>> t;
  t.reserve(static_cast<std::size_t>(A.nonZeros()) * static_cast<std::size_t>(B.nonZeros()));
  for (int ka = 0; ka < A.outerSize(); ++ka)
    for (SparseC::InnerIterator ia(A, ka); ia; ++ia)
      for (int kb = 0; kb < B.outerSize(); ++kb)
        for (SparseC::InnerIterator ib(B, kb); ib; ++ib)
          t.emplace_back(ia.row() * B.rows() + ib.row(), ia.col() * B.cols() + ib.col(), ia.value() * ib.value());
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

SparseC ket_bra(int dim, int a, int b) {
  SparseC m(dim, dim);
  m.insert(a, b) = 1.0;
  return m;
}

struct Operators {
  int dim = 0;
  SparseC H;
  std::vector<SparseC> jumps;
  SparseC a;
};

Operators build_operators(const OracleConfig& cfg) {
  const auto& p = cfg.params;
  const int nc = cfg.fock_cutoff;
  const int ns = cfg.n_spins;
  const int nl = cfg.spin_levels();
  int spin_dim = 1;
  for (int k = 0; k < ns; ++k) spin_dim *= nl;

  SparseC a(nc, nc);
  for (int n = 1; n < nc; ++n) a.insert(n - 1, n) = std::sqrt(static_cast<double>(n));
  const SparseC Is = identity(spin_dim);
  const SparseC Ic = identity(nc);

  Operators ops;
  ops.dim = nc * spin_dim;
  ops.a = kron(a, Is);
  const SparseC ad = SparseC(ops.a.adjoint());
  const SparseC num = ad * ops.a;
  ops.H = p.delta * num + cd(0.0, p.J) * (ad - ops.a);

  // Spin operator |r><c| on spin k (levels 0 = |1>, 1 = |2>, 2 = |e>), embedded
  // in the full space. Without |2> the spin space is {|1>, |e>}.
  const int index[3] = {0, nl == 3 ? 1 : -1, nl - 1};
  auto spin_op = [&](int k, int r, int c) {
    SparseC op = identity(1);
    if (index[r] < 0 || index[c] < 0) return SparseC(ops.dim, ops.dim);
    for (int j = 0; j < ns; ++j) op = kron(op, j == k ? ket_bra(nl, index[r], index[c]) : identity(nl));
    return SparseC(kron(Ic, op));
  };

  SpinParams s = p.spin();
  const double g = cfg.coupling();
  const double b = s.repump_to_2;
  const double f = s.nuclear_flip_fraction;
  const double gphi = s.pure_dephasing();
  for (int k = 0; k < ns; ++k) {
    const SparseC s11 = spin_op(k, 0, 0), s22 = spin_op(k, 1, 1), see = spin_op(k, 2, 2);
    const SparseC se1 = spin_op(k, 2, 0), se2 = spin_op(k, 2, 1);
    ops.H += s.delta_2 * s22 + s.delta_s * see;
    ops.H += s.level_shift[0] * s11 + s.level_shift[1] * s22 + s.level_shift[2] * see;
    ops.H += g * (SparseC(ops.a * se1) + SparseC(ad * SparseC(se1.adjoint())));
    ops.H += s.omega_2 * (se2 + SparseC(se2.adjoint()));
    auto add = [&](double rate, const SparseC& L) {
      if (rate > 0.0 && L.nonZeros() > 0) ops.jumps.push_back(std::sqrt(rate) * L);
    };
    add(s.gamma_p * (1.0 - b), spin_op(k, 0, 2));
    add(s.gamma_p * b, spin_op(k, 1, 2));
    add(s.gamma_th, spin_op(k, 2, 0));
    add(s.gamma_th, spin_op(k, 0, 2));
    add(s.aux_pump, spin_op(k, 2, 0));
    add(s.aux_pump, spin_op(k, 0, 2));
    add(2.0 * gphi, see);
    add((1.0 - f) * s.gamma_n, s22);
    add(f * s.gamma_n / 2.0, spin_op(k, 0, 1));
    add(f * s.gamma_n / 2.0, spin_op(k, 1, 0));
  }
  const double kappa = p.kappa();
  if (kappa > 0.0) ops.jumps.push_back(std::sqrt(kappa) * ops.a);
  return ops;
}

}  // namespace

void OracleConfig::validate() const {
  if (n_spins < 1 || n_spins > 3) throw InvalidArgument("oracle: n_spins must be 1, 2 or 3");
  if (fock_cutoff < 2 || fock_cutoff > 30) throw InvalidArgument("oracle: fock_cutoff must lie in [2, 30]");
  if (hilbert_dim() > kMaxHilbert) {
    std::ostringstream os;
    os << "oracle: Hilbert dimension " << hilbert_dim() << " exceeds " << kMaxHilbert << " (Liouvillian would be "
       << static_cast<long long>(hilbert_dim()) * hilbert_dim() << " square)";
    throw InvalidArgument(os.str());
  }
  const auto& p = params;
  for (double r : {p.kappa_c, p.kappa_c1, p.Gamma, p.Gamma_n, p.gamma_p, p.gamma_th, p.J, p.omega_2, p.g_s, p.N})
    if (!(r >= 0.0) || !std::isfinite(r)) throw InvalidArgument("oracle: rates must be finite and >= 0");
}

int OracleConfig::spin_levels() const {
  const bool reaches_2 = params.omega_2 != 0.0 || params.gamma_p * params.repump_to_2 > 0.0 ||
                         params.Gamma_n * params.nuclear_flip_fraction > 0.0;
  return reaches_2 ? 3 : 2;
}

int OracleConfig::hilbert_dim() const {
  int d = fock_cutoff;
  for (int k = 0; k < n_spins; ++k) d *= spin_levels();
  return d;
}

double OracleConfig::coupling() const {
  return params.N > 0.0 ? params.g_s * std::sqrt(params.N / n_spins) : params.g_s;
}

SparseC build_liouvillian(const OracleConfig& cfg) {
  cfg.validate();
  const Operators ops = build_operators(cfg);
  const int d = ops.dim;
  const SparseC I = identity(d);
  const cd mi(0.0, -1.0);
  // vec(A rho B) = (B^T kron A) vec(rho), column stacking.
  SparseC L = mi * (kron(I, ops.H) - kron(SparseC(ops.H.transpose()), I));
  for (const auto& J : ops.jumps) {
    const SparseC JdJ = SparseC(J.adjoint()) * J;
    L += kron(SparseC(J.conjugate()), J);
    L -= 0.5 * kron(I, JdJ);
    L -= 0.5 * kron(SparseC(JdJ.transpose()), I);
  }
  L.makeCompressed();
  return L;
}

namespace {

// Steady state with row `row` of the Liouvillian replaced by the trace functional.
Eigen::VectorXcd solve_trace_row(const SparseC& L, int d, int row, double scale) {
  const int n = d * d;
  std::vector<Eigen::Triplet<cd>> t;
  t.reserve(static_cast<std::size_t>(L.nonZeros()) + d);
  for (int k = 0; k < L.outerSize(); ++k)
    for (SparseC::InnerIterator it(L, k); it; ++it)
      if (it.row() != row) t.emplace_back(it.row(), it.col(), it.value() / scale);
  for (int i = 0; i < d; ++i) t.emplace_back(row, i * d + i, 1.0);
  SparseC A(n, n);
  A.setFromTriplets(t.begin(), t.end());
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(n);
  rhs(row) = 1.0;

  if (n < kDenseBelow) {
    Eigen::FullPivLU<Eigen::MatrixXcd> lu{Eigen::MatrixXcd(A)};
    if (lu.rank() < n) return {};
    return lu.solve(rhs);
  }
  Eigen::BiCGSTAB<SparseC, Eigen::IncompleteLUT<cd>> it;
  it.preconditioner().setDroptol(1e-6);
  it.preconditioner().setFillfactor(20);
  it.setTolerance(1e-13);
  it.compute(A);
  if (it.info() == Eigen::Success) {
    Eigen::VectorXcd x = it.solve(rhs);
    if (it.info() == Eigen::Success && x.allFinite()) return x;
  }
  Eigen::SparseLU<SparseC> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) return {};
  Eigen::VectorXcd x = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !x.allFinite()) return {};
  return x;
}

}  // namespace

OracleState steady_state_exact(const OracleConfig& cfg) {
  const SparseC L = build_liouvillian(cfg);
  const int d = cfg.hilbert_dim();
  const int n = d * d;
  auto degenerate = [&]() {
    std::ostringstream os;
    os << "oracle: degenerate null space, no unique steady state (Liouvillian dimension " << n << ")";
    throw SolverError(SolverError::Kind::Singular, os.str());
  };

  // Rates span several decades, so the system is scaled to unit largest entry.
  double scale = 0.0;
  for (int k = 0; k < L.outerSize(); ++k)
    for (SparseC::InnerIterator it(L, k); it; ++it) scale = std::max(scale, std::abs(it.value()));
  if (scale == 0.0) degenerate();

  // A unique steady state does not depend on which row carries the trace.
  const Eigen::VectorXcd x = solve_trace_row(L, d, 0, scale);
  const Eigen::VectorXcd y = solve_trace_row(L, d, n - 1, scale);
  if (x.size() == 0 || y.size() == 0 || (x - y).norm() > 1e-6 * x.norm()) degenerate();

  OracleState out;
  out.rho = Eigen::Map<const Eigen::MatrixXcd>(x.data(), d, d);
  out.rho = 0.5 * (out.rho + out.rho.adjoint().eval());
  const Operators ops = build_operators(cfg);
  const Eigen::MatrixXcd a(ops.a);
  out.a = (a * out.rho).trace();
  out.photons = (a.adjoint() * a * out.rho).trace().real();
  const int spin_dim = d / cfg.fock_cutoff;
  const int top = cfg.fock_cutoff - 1;
  for (int s = 0; s < spin_dim; ++s) out.top_fock_population += out.rho(top * spin_dim + s, top * spin_dim + s).real();
  out.cutoff_adequate = out.top_fock_population < 1e-6;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(out.rho, Eigen::EigenvaluesOnly);
  out.min_eigenvalue = es.eigenvalues().minCoeff();
  if (out.min_eigenvalue < -1e-8) {
    std::ostringstream os;
    os << "oracle: steady state not positive (smallest eigenvalue " << out.min_eigenvalue << ")";
    throw SolverError(SolverError::Kind::Singular, os.str());
  }
  return out;
}

cd mean_field_alpha(const OracleConfig& cfg) {
  LambdaParams p = cfg.params;
  p.g_s = cfg.coupling();
  p.N = cfg.n_spins;
  SolveOptions so;
  so.classify = false;
  return solve_steady_state(p, so).state.alpha;
}

OracleComparison compare_with_mean_field(const OracleConfig& cfg, bool check_cutoff) {
  OracleComparison c;
  c.config = cfg;
  const OracleState st = steady_state_exact(cfg);
  c.a_exact = st.a;
  c.top_fock_population = st.top_fock_population;
  c.a_meanfield = mean_field_alpha(cfg);
  c.rel_err = std::abs(c.a_exact - c.a_meanfield) / std::abs(c.a_exact);
  if (check_cutoff) {
    OracleConfig bigger = cfg;
    bigger.fock_cutoff = std::min(30, cfg.fock_cutoff + 5);
    if (bigger.hilbert_dim() <= kMaxHilbert) c.cutoff_shift = std::abs(steady_state_exact(bigger).a - st.a);
  }
  return c;
}

}  // namespace nvgyro
