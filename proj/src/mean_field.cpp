#include "nvgyro/mean_field.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "nvgyro/error.hpp"

namespace nvgyro {
namespace {

constexpr int kLambdaVars = 8;
constexpr int kFrozenVars = 3;
constexpr cd kI(0.0, 1.0);

// Adds the dissipator of the jump |a><b| with the given rate.
inline void jump(Eigen::Matrix3cd& out, const Eigen::Matrix3cd& rho, int a, int b, double rate) {
  if (rate == 0.0) return;
  out(a, a) += rate * rho(b, b);
  out.row(b) -= 0.5 * rate * rho.row(b);
  out.col(b) -= 0.5 * rate * rho.col(b);
}

std::mutex g_fftw_mutex;

}  // namespace

const char* to_string(Regime r) {
  switch (r) {
    case Regime::EIT:
      return "EIT";
    case Regime::PerfectEIT:
      return "PERFECT_EIT";
    case Regime::MWI:
      return "MWI";
    case Regime::Oscillation:
      return "OSCILLATION";
  }
  return "?";
}

double SpinParams::out_rate_1() const {
  double r = gamma_th;
  if (mode == MemberMode::Lambda) r += nuclear_flip_fraction * gamma_n / 2.0;
  return r;
}

double SpinParams::out_rate_e() const { return gamma_p + gamma_th; }

double SpinParams::pure_dephasing() const {
  return std::max(0.0, gamma / 2.0 - (out_rate_1() + out_rate_e()) / 2.0);
}

bool SpinParams::level2_decoupled() const {
  if (mode == MemberMode::TwoLevel) return true;
  return omega_2 == 0.0 && repump_to_2 * gamma_p == 0.0 && nuclear_flip_fraction * gamma_n == 0.0;
}

double SteadyStateSolution::max_growth_rate() const {
  if (jacobian_eigs.size() == 0) return 0.0;
  return jacobian_eigs.real().maxCoeff();
}

double EnsembleSet::cooperativity() const {
  const double k = cavity.kappa();
  double c = 0.0;
  for (const auto& m : members) {
    const double n = m.link ? m.link->total_spins : m.spin.n_spins;
    c += 4.0 * m.spin.g_s * m.spin.g_s * n / (k * m.spin.gamma);
  }
  return c;
}

void EnsembleSet::validate() const {
  auto bad = [](const std::string& what) { throw InvalidArgument(what); };
  if (!(cavity.kappa_c >= 0.0) || !(cavity.kappa_c1 >= 0.0) || !(cavity.kappa() > 0.0))
    bad("cavity rates must be non-negative with kappa > 0");
  if (!(cavity.drive >= 0.0) || !std::isfinite(cavity.drive)) bad("probe drive J must be finite and >= 0");
  if (!std::isfinite(cavity.delta)) bad("cavity detuning must be finite");
  if (members.empty()) bad("ensemble set has no members");
  for (std::size_t i = 0; i < members.size(); ++i) {
    const auto& m = members[i];
    const auto& s = m.spin;
    for (double r : {s.g_s, s.n_spins, s.omega_2, s.gamma, s.gamma_n, s.gamma_p, s.gamma_th, s.aux_pump})
      if (!(r >= 0.0) || !std::isfinite(r)) bad("member " + std::to_string(i) + ": rates must be finite and >= 0");
    if (!(s.gamma > 0.0)) bad("member " + std::to_string(i) + ": Gamma must be > 0");
    if (s.repump_to_2 < 0.0 || s.repump_to_2 > 1.0 || s.nuclear_flip_fraction < 0.0 ||
        s.nuclear_flip_fraction > 1.0)
      bad("member " + std::to_string(i) + ": branching fractions must lie in [0, 1]");
    if (!(m.weight > 0.0)) bad("member " + std::to_string(i) + ": weight must be > 0");
    if (m.link) {
      if (m.link->source >= members.size() || m.link->source == i || members[m.link->source].link)
        bad("member " + std::to_string(i) + ": population link must name another unlinked member");
      if (members[m.link->source].spin.mode != MemberMode::Lambda)
        bad("member " + std::to_string(i) + ": population link source must be a Lambda member");
    }
  }
}

MeanFieldModel::MeanFieldModel(EnsembleSet set) : set_(std::move(set)) {
  set_.validate();
  const auto& cav = set_.cavity;
  if (cav.drive > 0.0) alpha_scale_ = cav.drive / (cav.kappa() / 2.0);

  const std::size_t M = set_.members.size();
  offset_.resize(M);
  nvars_.resize(M);
  frozen_.resize(M);
  gamma_phi_.resize(M);
  affine_.resize(M);
  int off = 2;
  for (std::size_t m = 0; m < M; ++m) {
    const auto& s = set_.members[m].spin;
    frozen_[m] = s.level2_decoupled();
    nvars_[m] = frozen_[m] ? kFrozenVars : kLambdaVars;
    offset_[m] = off;
    off += nvars_[m];
    const double raw = s.gamma / 2.0 - (s.out_rate_1() + s.out_rate_e()) / 2.0;
    if (raw < 0.0) {
      std::ostringstream os;
      os << "member " << m << ": Gamma/2 = " << s.gamma / 2.0
         << " rad/s is below the population-channel contribution; pure dephasing clipped to 0";
      warn(os.str());
    }
    gamma_phi_[m] = std::max(0.0, raw);
  }
  dim_ = off;

  for (std::size_t m = 0; m < M; ++m) {
    const int n = nvars_[m];
    std::vector<double> zero(n, 0.0);
    const Eigen::Matrix3cd rho0 = to_rho(m, zero.data());
    auto fill = [&](Affine& aff, auto&& op) {
      aff.A.resize(n, n);
      aff.c.resize(n);
      from_rho(m, op(rho0), aff.c.data());
      for (int k = 0; k < n; ++k) {
        std::vector<double> e(n, 0.0);
        e[k] = 1.0;
        const Eigen::Matrix3cd Ek = to_rho(m, e.data()) - rho0;
        Eigen::VectorXd col(n);
        from_rho(m, op(Ek), col.data());
        aff.A.col(k) = col;
      }
    };
    fill(affine_[m][0], [&](const Eigen::Matrix3cd& r) { return static_part(m, r); });
    fill(affine_[m][1], [&](const Eigen::Matrix3cd& r) { return coupling_part(m, cd(1.0, 0.0), r); });
    fill(affine_[m][2], [&](const Eigen::Matrix3cd& r) { return coupling_part(m, cd(0.0, 1.0), r); });
  }

  for (std::size_t m = 0; m < M; ++m)
    if (!set_.members[m].link) solve_order_.push_back(m);
  for (std::size_t m = 0; m < M; ++m)
    if (set_.members[m].link) solve_order_.push_back(m);
}

Eigen::Matrix3cd MeanFieldModel::to_rho(std::size_t m, const double* v) const {
  Eigen::Matrix3cd r = Eigen::Matrix3cd::Zero();
  if (frozen_[m]) {
    r(0, 0) = v[0];
    r(2, 2) = 1.0 - v[0];
    r(2, 0) = cd(v[1], v[2]);
    r(0, 2) = std::conj(r(2, 0));
    return r;
  }
  r(0, 0) = v[0];
  r(1, 1) = v[1];
  r(2, 2) = 1.0 - v[0] - v[1];
  r(1, 0) = cd(v[2], v[3]);
  r(2, 0) = cd(v[4], v[5]);
  r(2, 1) = cd(v[6], v[7]);
  r(0, 1) = std::conj(r(1, 0));
  r(0, 2) = std::conj(r(2, 0));
  r(1, 2) = std::conj(r(2, 1));
  return r;
}

void MeanFieldModel::from_rho(std::size_t m, const Eigen::Matrix3cd& r, double* v) const {
  if (frozen_[m]) {
    v[0] = r(0, 0).real();
    v[1] = r(2, 0).real();
    v[2] = r(2, 0).imag();
    return;
  }
  v[0] = r(0, 0).real();
  v[1] = r(1, 1).real();
  v[2] = r(1, 0).real();
  v[3] = r(1, 0).imag();
  v[4] = r(2, 0).real();
  v[5] = r(2, 0).imag();
  v[6] = r(2, 1).real();
  v[7] = r(2, 1).imag();
}

Eigen::Matrix3cd MeanFieldModel::static_part(std::size_t m, const Eigen::Matrix3cd& rho) const {
  const auto& s = set_.members[m].spin;
  const bool lambda = s.mode == MemberMode::Lambda;
  Eigen::Matrix3cd H = Eigen::Matrix3cd::Zero();
  H(0, 0) = s.level_shift(0);
  H(1, 1) = s.delta_2 + s.level_shift(1);
  H(2, 2) = s.delta_s + s.level_shift(2);
  if (lambda) H(2, 1) = H(1, 2) = s.omega_2;
  Eigen::Matrix3cd out = -kI * (H * rho - rho * H);

  const double b = lambda ? s.repump_to_2 : 0.0;
  jump(out, rho, 0, 2, s.gamma_p * (1.0 - b));
  jump(out, rho, 1, 2, s.gamma_p * b);
  jump(out, rho, 2, 0, s.gamma_th);
  jump(out, rho, 0, 2, s.gamma_th);
  jump(out, rho, 2, 0, s.aux_pump);
  jump(out, rho, 0, 2, s.aux_pump);
  jump(out, rho, 2, 2, 2.0 * gamma_phi_[m]);
  if (lambda) {
    const double f = s.nuclear_flip_fraction;
    jump(out, rho, 1, 1, (1.0 - f) * s.gamma_n);
    jump(out, rho, 0, 1, f * s.gamma_n / 2.0);
    jump(out, rho, 1, 0, f * s.gamma_n / 2.0);
  }
  return out;
}

Eigen::Matrix3cd MeanFieldModel::coupling_part(std::size_t m, cd alpha, const Eigen::Matrix3cd& rho) const {
  const double g = set_.members[m].spin.g_s;
  Eigen::Matrix3cd H = Eigen::Matrix3cd::Zero();
  H(2, 0) = g * alpha;
  H(0, 2) = g * std::conj(alpha);
  return -kI * (H * rho - rho * H);
}

Eigen::Matrix3cd MeanFieldModel::member_derivative(std::size_t m, cd alpha, const Eigen::Matrix3cd& rho) const {
  return static_part(m, rho) + coupling_part(m, alpha, rho);
}

double MeanFieldModel::member_spins(std::size_t m, const Eigen::VectorXd& x) const {
  const auto& mem = set_.members[m];
  if (!mem.link) return mem.spin.n_spins;
  const std::size_t src = mem.link->source;
  if (frozen_[src]) return 0.0;
  return mem.link->total_spins * x(offset_[src] + 1);
}

Eigen::VectorXd MeanFieldModel::pack(const SystemState& s) const {
  if (s.rho.size() != set_.members.size()) throw InvalidArgument("state has wrong member count");
  Eigen::VectorXd x(dim_);
  x(0) = s.alpha.real() / alpha_scale_;
  x(1) = s.alpha.imag() / alpha_scale_;
  for (std::size_t m = 0; m < s.rho.size(); ++m) from_rho(m, s.rho[m], x.data() + offset_[m]);
  return x;
}

SystemState MeanFieldModel::unpack(const Eigen::VectorXd& x) const {
  SystemState s;
  s.alpha = alpha_scale_ * cd(x(0), x(1));
  s.rho.reserve(set_.members.size());
  for (std::size_t m = 0; m < set_.members.size(); ++m) s.rho.push_back(to_rho(m, x.data() + offset_[m]));
  return s;
}

SystemState MeanFieldModel::ground_state(cd alpha) const {
  SystemState s;
  s.alpha = alpha;
  for (std::size_t m = 0; m < set_.members.size(); ++m) {
    Eigen::Matrix3cd r = Eigen::Matrix3cd::Zero();
    r(0, 0) = 1.0;
    s.rho.push_back(r);
  }
  return s;
}

void MeanFieldModel::rhs(const Eigen::VectorXd& x, Eigen::VectorXd& dx) const {
  dx.resize(dim_);
  const auto& cav = set_.cavity;
  const cd alpha = alpha_scale_ * cd(x(0), x(1));
  cd da = -(kI * cav.delta + cav.kappa() / 2.0) * alpha + cav.drive;
  for (std::size_t m = 0; m < set_.members.size(); ++m) {
    const int o = offset_[m], n = nvars_[m];
    const auto& aff = affine_[m];
    const auto v = x.segment(o, n);
    dx.segment(o, n) = aff[0].A * v + aff[0].c + alpha.real() * (aff[1].A * v + aff[1].c) +
                       alpha.imag() * (aff[2].A * v + aff[2].c);
    const cd rho_e1 = frozen_[m] ? cd(v(1), v(2)) : cd(v(4), v(5));
    da -= kI * set_.members[m].spin.g_s * member_spins(m, x) * rho_e1;
  }
  dx(0) = da.real() / alpha_scale_;
  dx(1) = da.imag() / alpha_scale_;
}

Eigen::MatrixXd MeanFieldModel::jacobian(const Eigen::VectorXd& x) const {
  // The right-hand side is at most quadratic in x, so a central difference
  // is exact for any step; a unit step keeps rounding error small.
  Eigen::MatrixXd Jm(dim_, dim_);
  Eigen::VectorXd xp = x, xm = x, fp, fm;
  for (int k = 0; k < dim_; ++k) {
    const double h = std::max(1.0, std::abs(x(k)));
    xp(k) = x(k) + h;
    xm(k) = x(k) - h;
    rhs(xp, fp);
    rhs(xm, fm);
    Jm.col(k) = (fp - fm) / (2.0 * h);
    xp(k) = xm(k) = x(k);
  }
  return Jm;
}

Eigen::VectorXcd MeanFieldModel::jacobian_eigenvalues(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd Jm = jacobian(x);
  const int n = dim_;
  // Balance the field rows against the spin rows (g N / alpha_s versus g alpha_s).
  const double up = Jm.block(2, 0, n - 2, 2).norm();
  const double down = Jm.block(0, 2, 2, n - 2).norm();
  if (up > 0.0 && down > 0.0) {
    const double s = std::sqrt(up / down);
    Jm.block(0, 2, 2, n - 2) *= s;
    Jm.block(2, 0, n - 2, 2) /= s;
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(Jm, false);
  if (es.info() == Eigen::Success) return es.eigenvalues();
  // The real QR iteration occasionally stalls on near-decoupled blocks; the complex one does not.
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> ces(Jm.cast<cd>(), false);
  if (ces.info() != Eigen::Success)
    throw SolverError(SolverError::Kind::NoConvergence, "Jacobian eigen decomposition failed");
  return ces.eigenvalues();
}

double MeanFieldModel::growth_tol() const {
  double rate = set_.cavity.kappa();
  for (const auto& m : set_.members) rate = std::max(rate, m.spin.gamma);
  return 1e-9 * rate;
}

double MeanFieldModel::residual(const Eigen::VectorXd& x) const {
  Eigen::VectorXd dx;
  rhs(x, dx);
  const double k2 = set_.cavity.kappa() / 2.0;
  const double ascale = std::max(std::hypot(x(0), x(1)), 1.0);
  double res = std::hypot(dx(0), dx(1)) / (k2 * ascale);
  double rate = 0.0;
  for (const auto& m : set_.members) rate = std::max(rate, m.spin.gamma);
  if (dim_ > 2) res = std::max(res, dx.tail(dim_ - 2).cwiseAbs().maxCoeff() / rate);
  return res;
}

MeanFieldModel::FieldEval MeanFieldModel::eval_field(cd alpha) const {
  FieldEval out;
  out.x = Eigen::VectorXd::Zero(dim_);
  out.x(0) = alpha.real() / alpha_scale_;
  out.x(1) = alpha.imag() / alpha_scale_;
  const auto& cav = set_.cavity;
  out.F = -(kI * cav.delta + cav.kappa() / 2.0) * alpha + cav.drive;
  out.dF_dre = -(kI * cav.delta + cav.kappa() / 2.0);
  out.dF_dim = kI * out.dF_dre;

  const std::size_t M = set_.members.size();
  std::vector<Eigen::VectorXd> dv_re(M), dv_im(M);
  for (std::size_t m : solve_order_) {
    const auto& aff = affine_[m];
    const Eigen::MatrixXd A = aff[0].A + alpha.real() * aff[1].A + alpha.imag() * aff[2].A;
    const Eigen::VectorXd c = aff[0].c + alpha.real() * aff[1].c + alpha.imag() * aff[2].c;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    if (!(lu.rcond() > 1e-15)) {
      std::ostringstream os;
      os << "spin steady state of member " << m << " is singular (rcond " << lu.rcond() << ")";
      throw SolverError(SolverError::Kind::Singular, os.str());
    }
    const Eigen::VectorXd v = -lu.solve(c);
    dv_re[m] = -lu.solve(aff[1].A * v + aff[1].c);
    dv_im[m] = -lu.solve(aff[2].A * v + aff[2].c);
    out.x.segment(offset_[m], nvars_[m]) = v;
  }
  for (std::size_t m = 0; m < M; ++m) {
    const int o = offset_[m];
    const int ie = frozen_[m] ? 1 : 4;
    const cd rho_e1(out.x(o + ie), out.x(o + ie + 1));
    const cd d_re(dv_re[m](ie), dv_re[m](ie + 1));
    const cd d_im(dv_im[m](ie), dv_im[m](ie + 1));
    const double g = set_.members[m].spin.g_s;
    double n = member_spins(m, out.x);
    double dn_re = 0.0, dn_im = 0.0;
    if (const auto& link = set_.members[m].link; link && !frozen_[link->source]) {
      dn_re = link->total_spins * dv_re[link->source](1);
      dn_im = link->total_spins * dv_im[link->source](1);
    }
    out.F -= kI * g * n * rho_e1;
    out.dF_dre -= kI * g * (n * d_re + dn_re * rho_e1);
    out.dF_dim -= kI * g * (n * d_im + dn_im * rho_e1);
  }
  return out;
}

Regime classify(const Eigen::VectorXcd& eigs, double growth_tol, double gain_ratio, cd rho_e1,
                cd reference_rho_e1, double tol_eit) {
  if (eigs.size() > 0 && eigs.real().maxCoeff() > growth_tol) return Regime::Oscillation;
  if (gain_ratio > 1.0) return Regime::Oscillation;
  if (std::abs(rho_e1.imag()) <= tol_eit * std::abs(reference_rho_e1)) return Regime::PerfectEIT;
  return rho_e1.imag() < 0.0 ? Regime::EIT : Regime::MWI;
}

namespace {

struct Root {
  Eigen::VectorXd x;
  double residual;
  Eigen::VectorXcd eigs;
  bool stable;
};

std::optional<Root> newton(const MeanFieldModel& model, cd alpha, const SolveOptions& opts) {
  const double k2 = model.set().cavity.kappa() / 2.0;
  const double as = model.alpha_scale();
  auto scale = [&](cd a) { return k2 * std::max(std::abs(a), as); };
  MeanFieldModel::FieldEval ev;
  try {
    ev = model.eval_field(alpha);
  } catch (const SolverError&) {
    return std::nullopt;
  }
  for (int it = 0; it < opts.max_newton; ++it) {
    if (std::abs(ev.F) <= 1e-13 * scale(alpha)) break;
    Eigen::Matrix2d Jm;
    Jm << ev.dF_dre.real(), ev.dF_dim.real(), ev.dF_dre.imag(), ev.dF_dim.imag();
    const Eigen::Vector2d step = -Jm.fullPivLu().solve(Eigen::Vector2d(ev.F.real(), ev.F.imag()));
    if (!step.allFinite()) return std::nullopt;
    double lambda = 1.0;
    bool accepted = false;
    while (lambda > 1e-12) {
      const cd trial = alpha + lambda * cd(step(0), step(1));
      try {
        auto tv = model.eval_field(trial);
        if (std::abs(tv.F) < (1.0 - 1e-4 * lambda) * std::abs(ev.F)) {
          alpha = trial;
          ev = std::move(tv);
          accepted = true;
          break;
        }
      } catch (const SolverError&) {
      }
      lambda *= opts.newton_damping;
    }
    if (!accepted) break;
    if (std::abs(cd(step(0), step(1))) * lambda <= 1e-15 * std::max(std::abs(alpha), as)) break;
  }
  Root r;
  r.x = ev.x;
  r.residual = model.residual(r.x);
  if (!(r.residual <= 1e-10)) return std::nullopt;
  r.eigs = model.jacobian_eigenvalues(r.x);
  r.stable = r.eigs.real().maxCoeff() <= model.growth_tol();
  return r;
}

SteadyStateSolution finish(const MeanFieldModel& model, const Root& root, const SolveOptions& opts) {
  const auto& set = model.set();
  SteadyStateSolution sol;
  sol.state = model.unpack(root.x);
  sol.residual = root.residual;
  sol.jacobian_eigs = root.eigs;
  const double J = set.cavity.drive;
  if (J > 0.0) sol.alpha0 = set.cavity.kappa_c1 * sol.state.alpha / J;
  sol.r = -1.0 + sol.alpha0;
  if (J > 0.0) {
    double src = 0.0;
    for (std::size_t m = 0; m < set.members.size(); ++m)
      src += set.members[m].spin.g_s * model.member_spins(m, root.x) * sol.state.rho[m](2, 0).imag();
    sol.gain_ratio = src / J;
  }
  if (!opts.classify) {
    sol.regime = root.stable ? Regime::EIT : Regime::Oscillation;
    if (root.stable) {
      const cd rho_e1 = sol.state.rho[opts.probed_member](2, 0);
      sol.regime = rho_e1.imag() < 0.0 ? Regime::EIT : Regime::MWI;
    }
    return sol;
  }
  cd ref;
  if (opts.reference_rho_e1) {
    ref = *opts.reference_rho_e1;
  } else {
    EnsembleSet bare = set;
    for (auto& m : bare.members) m.spin.omega_2 = 0.0;
    SolveOptions o;
    o.classify = false;
    o.probed_member = opts.probed_member;
    ref = solve_steady_state(bare, o).state.rho[opts.probed_member](2, 0);
  }
  sol.regime = classify(root.eigs, model.growth_tol(), sol.gain_ratio, sol.state.rho[opts.probed_member](2, 0),
                        ref, opts.tol_eit);
  return sol;
}

}  // namespace

SteadyStateSolution solve_steady_state(const EnsembleSet& set, const SolveOptions& opts) {
  const MeanFieldModel model(set);
  if (opts.probed_member >= set.members.size()) throw InvalidArgument("probed_member out of range");
  const auto& cav = set.cavity;
  const cd empty = cav.drive / (kI * cav.delta + cav.kappa() / 2.0);
  std::vector<cd> guesses;
  if (opts.guess) guesses.push_back(*opts.guess);
  const double C = set.cooperativity();
  for (double f : {1.0 / (1.0 + C), 1.0, 3.0, 10.0, 30.0, 100.0, 300.0, 1000.0}) guesses.push_back(f * empty);

  std::vector<Root> roots;
  for (cd g : guesses) {
    auto r = newton(model, g, opts);
    if (!r) continue;
    if (r->stable) return finish(model, *r, opts);
    roots.push_back(std::move(*r));
  }
  if (!roots.empty()) {
    SteadyStateSolution sol = finish(model, roots.front(), opts);
    sol.regime = Regime::Oscillation;
    return sol;
  }
  if (!opts.integration_fallback)
    throw SolverError(SolverError::Kind::NoAttractor, "Newton failed from every initial guess");

  double slow = cav.kappa();
  for (const auto& m : set.members) slow = std::min(slow, m.spin.mode == MemberMode::Lambda ? m.spin.gamma_n : m.spin.gamma);
  const double horizon = 50.0 / slow;
  IntegrateOptions io;
  io.sample_dt = horizon / 2000.0;
  const TimeTrace tr = integrate(set, model.ground_state(empty), horizon, io);
  if (auto r = newton(model, tr.alpha.back(), opts); r && r->stable) {
    SteadyStateSolution sol = finish(model, *r, opts);
    sol.from_integration = true;
    return sol;
  }
  if (tr.beat_frequency) {
    Root r;
    r.x = model.pack(tr.states.back());
    r.residual = model.residual(r.x);
    r.eigs = model.jacobian_eigenvalues(r.x);
    r.stable = false;
    SteadyStateSolution sol = finish(model, r, opts);
    sol.regime = Regime::Oscillation;
    sol.from_integration = true;
    return sol;
  }
  throw SolverError(SolverError::Kind::NoAttractor,
                    "no stable fixed point and no limit cycle found within 50/Gamma_n of integration");
}

TimeTrace integrate(const EnsembleSet& set, const SystemState& initial, double t_final,
                    const IntegrateOptions& opts) {
  if (!(t_final > 0.0)) throw InvalidArgument("integrate: t_final must be > 0");
  if (!(opts.sample_dt > 0.0)) throw InvalidArgument("integrate: sample_dt must be > 0");
  const MeanFieldModel model(set);
  const int n = model.dim();

  // Dormand-Prince 5(4).
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                          b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;

  const cd tone = opts.tone_drive / model.alpha_scale();
  auto f = [&](double tt, const Eigen::VectorXd& xx, Eigen::VectorXd& out) {
    model.rhs(xx, out);
    if (tone != 0.0) {
      const cd d = tone * std::exp(cd(0.0, -opts.tone_offset * tt));
      out(0) += d.real();
      out(1) += d.imag();
    }
  };

  Eigen::VectorXd x = model.pack(initial);
  Eigen::VectorXd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), y(n), err(n);
  f(0.0, x, k1);

  TimeTrace tr;
  auto record = [&](double t) {
    tr.times.push_back(t);
    tr.alpha.push_back(model.alpha_scale() * cd(x(0), x(1)));
    if (opts.keep_states) tr.states.push_back(model.unpack(x));
  };
  record(0.0);

  double rate = set.cavity.kappa();
  for (const auto& m : set.members) rate = std::max(rate, m.spin.gamma);
  double h = 0.01 / rate;
  double t = 0.0;
  std::size_t steps = 0;
  const std::size_t nsamples = static_cast<std::size_t>(std::ceil(t_final / opts.sample_dt - 1e-9));
  for (std::size_t s = 1; s <= nsamples; ++s) {
    const double t_next = std::min(t_final, s * opts.sample_dt);
    while (t < t_next) {
      const bool clipped = t + h >= t_next;
      const double hs = clipped ? t_next - t : h;
      y = x + hs * a21 * k1;
      f(t + hs / 5.0, y, k2);
      y = x + hs * (a31 * k1 + a32 * k2);
      f(t + 0.3 * hs, y, k3);
      y = x + hs * (a41 * k1 + a42 * k2 + a43 * k3);
      f(t + 0.8 * hs, y, k4);
      y = x + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
      f(t + hs * 8.0 / 9.0, y, k5);
      y = x + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
      f(t + hs, y, k6);
      y = x + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      f(t + hs, y, k7);
      err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      double en = 0.0;
      for (int i = 0; i < n; ++i) {
        const double sc = opts.atol + opts.rtol * std::max(std::abs(x(i)), std::abs(y(i)));
        en = std::max(en, std::abs(err(i)) / sc);
      }
      if (!std::isfinite(en)) en = 1e10;
      if (en <= 1.0) {
        t = clipped ? t_next : t + hs;
        x = y;
        k1 = k7;
        for (std::size_t m = 0; m < set.members.size(); ++m) {
          const int o = model.member_offset(m);
          const double p11 = x(o);
          const double p22 = model.member_vars(m) == 3 ? 0.0 : x(o + 1);
          if (p11 < -1e-10 || p22 < -1e-10 || 1.0 - p11 - p22 < -1e-10) {
            std::ostringstream os;
            os << "integrate: negative population at t = " << t << " s in member " << m;
            throw SolverError(SolverError::Kind::StiffTrajectory, os.str());
          }
        }
      }
      const double fac = std::clamp(0.9 * std::pow(std::max(en, 1e-10), -0.2), 0.2, 5.0);
      if (!clipped || en > 1.0) h = hs * fac;
      if (h < 1e-14 * std::max(t_final, 1e-300) || ++steps > opts.max_steps) {
        std::ostringstream os;
        os << "stiff trajectory: step size " << h << " s at t = " << t << " s after " << steps
           << " steps (error norm " << en << ")";
        throw SolverError(SolverError::Kind::StiffTrajectory, os.str());
      }
    }
    record(t);
  }

  if (opts.detect_beat && tr.alpha.size() >= 16) {
    const std::size_t N = tr.alpha.size();
    const std::size_t half = N / 2, q = N - (N - half) / 2;
    auto spread = [&](std::size_t a, std::size_t b) {
      double lo = tr.alpha[a].imag(), hi = lo;
      for (std::size_t i = a; i < b; ++i) {
        lo = std::min(lo, tr.alpha[i].imag());
        hi = std::max(hi, tr.alpha[i].imag());
      }
      return hi - lo;
    };
    double mag = 0.0;
    for (std::size_t i = half; i < N; ++i) mag = std::max(mag, std::abs(tr.alpha[i]));
    const double late = spread(q, N), early = spread(half, q);
    if (late > 1e-6 * std::max(mag, 1e-300) && late > 0.5 * early) {
      std::vector<double> im;
      for (std::size_t i = half; i < N; ++i) im.push_back(tr.alpha[i].imag());
      tr.beat_frequency = dominant_frequency(im, opts.sample_dt);
    }
  }
  return tr;
}

std::optional<double> dominant_frequency(const std::vector<double>& samples, double dt) {
  const std::size_t n = samples.size();
  if (n < 8) return std::nullopt;
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= static_cast<double>(n);
  std::size_t nfft = 1;
  while (nfft < n) nfft <<= 1;
  nfft *= 8;
  std::vector<double> in(nfft, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / static_cast<double>(n - 1));
    in[i] = (samples[i] - mean) * w;
  }
  std::vector<fftw_complex> out(nfft / 2 + 1);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(g_fftw_mutex);
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(nfft), in.data(), out.data(), FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(g_fftw_mutex);
    fftw_destroy_plan(plan);
  }
  std::vector<double> mag(nfft / 2 + 1);
  for (std::size_t k = 0; k < mag.size(); ++k) mag[k] = std::hypot(out[k][0], out[k][1]);
  // Skip the Hann main lobe around zero frequency.
  const std::size_t kmin = 2 * nfft / n + 1;
  if (kmin + 2 >= mag.size()) return std::nullopt;
  std::size_t kb = kmin;
  for (std::size_t k = kmin; k + 1 < mag.size(); ++k)
    if (mag[k] > mag[kb]) kb = k;
  if (mag[kb] <= 0.0) return std::nullopt;
  double delta = 0.0;
  if (kb > kmin) {
    const double l = std::log(mag[kb - 1] + 1e-300), c = std::log(mag[kb]), r = std::log(mag[kb + 1] + 1e-300);
    const double den = l - 2.0 * c + r;
    if (den < 0.0) delta = 0.5 * (l - r) / den;
  }
  const double f = (static_cast<double>(kb) + delta) / (static_cast<double>(nfft) * dt);
  return kTwoPi * f;
}

}  // namespace nvgyro
