#include "nvgyro/multi_ensemble.hpp"

#include <omp.h>

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "nvgyro/error.hpp"

namespace nvgyro {
namespace {

int thread_count(int workers) { return workers > 0 ? workers : omp_get_max_threads(); }

// Index of the smallest value on [lo, hi) and a parabolic refinement of its position.
std::optional<double> refined_min(const std::vector<double>& x, const std::vector<double>& y, std::size_t lo,
                                  std::size_t hi) {
  if (hi <= lo + 2) return std::nullopt;
  std::size_t k = lo;
  for (std::size_t i = lo; i < hi; ++i)
    if (y[i] < y[k]) k = i;
  if (k == lo || k + 1 == hi) return std::nullopt;
  const double y0 = y[k - 1], y1 = y[k], y2 = y[k + 1];
  const double den = y0 - 2.0 * y1 + y2;
  const double dx = x[k + 1] - x[k];
  const double off = den > 0.0 ? 0.5 * (y0 - y2) / den : 0.0;
  return x[k] + off * dx;
}

}  // namespace

EnsembleSet comag_set(const LambdaParams& base, double delta_sc, const ComagLayout& layout) {
  const double n_hf = layout.n_per_member > 0.0 ? layout.n_per_member : base.N / 2.0;
  EnsembleSet set;
  set.cavity = base.cavity();

  Member lam;
  lam.spin = base.spin();
  lam.spin.n_spins = 2.0 * n_hf;  // |0,-1> and |0,0> together
  lam.spin.delta_s = delta_sc + base.delta;
  lam.spin.delta_2 = lam.spin.delta_s + base.delta_2;
  set.members.push_back(lam);

  Member two = lam;
  two.spin.mode = MemberMode::TwoLevel;
  two.spin.omega_2 = 0.0;
  two.spin.delta_2 = 0.0;
  two.spin.delta_s = delta_sc + base.delta - layout.hyperfine_split;
  two.link = PopulationLink{0, 2.0 * n_hf};
  set.members.push_back(two);

  Member three = two;
  three.link.reset();
  three.spin.n_spins = n_hf;
  three.spin.delta_s = delta_sc + base.delta - 2.0 * layout.hyperfine_split;
  set.members.push_back(three);
  return set;
}

std::vector<MapCell> reflection_map(const LambdaParams& base, const std::vector<double>& delta_grid,
                                    const std::vector<double>& delta_sc_grid, const ComagLayout& layout,
                                    int workers) {
  const long nr = static_cast<long>(delta_sc_grid.size());
  const std::size_t nc = delta_grid.size();
  std::vector<MapCell> out(nr * nc);
#pragma omp parallel for schedule(dynamic) num_threads(thread_count(workers))
  for (long i = 0; i < nr; ++i) {
    std::optional<cd> guess;
    for (std::size_t j = 0; j < nc; ++j) {
      MapCell& c = out[i * nc + j];
      c.delta = delta_grid[j];
      c.delta_sc = delta_sc_grid[i];
      try {
        LambdaParams p = base;
        p.delta = c.delta;
        SolveOptions so;
        so.classify = false;
        so.guess = guess;
        const auto sol = solve_steady_state(comag_set(p, c.delta_sc, layout), so);
        guess = sol.state.alpha;
        c.r = sol.r;
        c.abs_r2 = std::norm(sol.r);
        c.regime = sol.regime;
        c.ok = true;
      } catch (const Error&) {
        guess.reset();
      }
    }
  }
  return out;
}

CrossingSplitting avoided_crossing(const LambdaParams& base, std::size_t member, const ComagLayout& layout,
                                   double half_span, int points) {
  if (member > 2) throw InvalidArgument("avoided_crossing: member must be 0, 1 or 2");
  if (points < 11) throw InvalidArgument("avoided_crossing: need at least 11 points");
  CrossingSplitting out;
  out.member = member;
  const double delta_sc = static_cast<double>(member) * layout.hyperfine_split;
  std::vector<double> x(points), y(points);
  std::optional<cd> guess;
  for (int k = 0; k < points; ++k) {
    x[k] = -half_span + 2.0 * half_span * k / (points - 1);
    LambdaParams p = base;
    p.delta = x[k];
    SolveOptions so;
    so.classify = false;
    so.guess = guess;
    const auto sol = solve_steady_state(comag_set(p, delta_sc, layout), so);
    guess = sol.state.alpha;
    y[k] = std::norm(sol.r);
  }
  const double gap = base.Gamma / 2.0;
  std::size_t mid_lo = 0, mid_hi = points;
  for (int k = 0; k < points; ++k) {
    if (x[k] < -gap) mid_lo = k + 1;
    if (x[k] > gap && mid_hi == static_cast<std::size_t>(points)) mid_hi = k;
  }
  const auto lo = refined_min(x, y, 0, mid_lo);
  const auto hi = refined_min(x, y, mid_hi, points);
  if (lo && hi) {
    out.lower = *lo;
    out.upper = *hi;
    out.splitting = *hi - *lo;
    out.found = true;
  }
  return out;
}

SecondToneResponse second_tone_response(const EnsembleSet& set, const SteadyStateSolution& op,
                                        const std::vector<double>& delta_grid, double p2_dbm, double omega_d) {
  const MeanFieldModel model(set);
  const Eigen::VectorXd x0 = model.pack(op.state);
  const Eigen::VectorXcd eigs = model.jacobian_eigenvalues(x0);
  if (eigs.size() > 0 && eigs.real().maxCoeff() > model.growth_tol())
    throw SolverError(SolverError::Kind::LimitCycle, "linear response undefined on limit cycle");

  SecondToneResponse out;
  out.p2_dbm = p2_dbm;
  out.J2 = power_to_drive(p2_dbm, set.cavity.kappa_c1, omega_d);
  if (!(out.J2 > 0.0)) throw InvalidArgument("second_tone_response: second tone power must be finite");
  const Eigen::MatrixXcd A = model.jacobian(x0).cast<cd>();
  const int n = model.dim();
  const double as = model.alpha_scale();
  // Unit tone; r2 does not depend on J2 in linear response.
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(n);
  v(0) = 1.0 / as;
  v(1) = cd(0.0, -1.0 / as);
  const double g = set.members.at(0).spin.g_s;
  for (double d : delta_grid) {
    const Eigen::MatrixXcd K = cd(0.0, -d) * Eigen::MatrixXcd::Identity(n, n) - A;
    const Eigen::VectorXcd X = K.partialPivLu().solve(v);
    const cd a = as * (X(0) + cd(0.0, 1.0) * X(1)) / 2.0;
    out.delta.push_back(d);
    out.a_plus.push_back(out.J2 * a);
    out.r2.push_back(-1.0 + set.cavity.kappa_c1 * a);
    out.omega_R.push_back(g * out.J2 * std::abs(a));
  }
  return out;
}

cd two_tone_time_domain(const EnsembleSet& set, const SteadyStateSolution& op, double delta, double J2,
                        int settle_periods, int window_periods) {
  if (delta == 0.0) throw InvalidArgument("two_tone_time_domain: delta must be nonzero");
  if (!(J2 > 0.0)) throw InvalidArgument("two_tone_time_domain: J2 must be > 0");
  constexpr int kPerPeriod = 32;
  const double period = kTwoPi / std::abs(delta);
  IntegrateOptions io;
  io.sample_dt = period / kPerPeriod;
  io.keep_states = false;
  io.detect_beat = false;
  io.tone_drive = J2;
  io.tone_offset = delta;
  const TimeTrace tr = integrate(set, op.state, period * (settle_periods + window_periods), io);
  const std::size_t n = static_cast<std::size_t>(window_periods) * kPerPeriod;
  const std::size_t start = tr.alpha.size() - 1 - n;
  cd acc(0.0, 0.0);
  for (std::size_t i = start; i < start + n; ++i) acc += tr.alpha[i] * std::exp(cd(0.0, delta * tr.times[i]));
  const cd a_plus = acc / static_cast<double>(n);
  return -1.0 + set.cavity.kappa_c1 * a_plus / J2;
}

ComagReadout comag_readout(const EnsembleSet& set, const std::vector<double>& delta_grid, double p2_dbm,
                           const NoiseModel& noise, const NVParams& nv, double fd_step) {
  noise.validate();
  if (!(fd_step > 0.0)) throw InvalidArgument("comag_readout: fd_step must be > 0");
  SolveOptions so;
  so.classify = false;
  const auto center = solve_steady_state(set, so);
  auto response = [&](double shift) {
    EnsembleSet s = set;
    for (auto& m : s.members) apply_common_shift(m.spin, shift);
    SolveOptions o = so;
    o.guess = center.state.alpha;
    const auto op = solve_steady_state(s, o);
    return second_tone_response(s, op, delta_grid, p2_dbm);
  };
  const auto plus = response(fd_step), minus = response(-fd_step);
  ComagReadout out;
  out.p2_dbm = p2_dbm;
  out.delta = delta_grid;
  const double V2 = probe_voltage(p2_dbm, noise.impedance);
  const double ratio = nv.gamma_n / nv.gamma_e;
  for (std::size_t k = 0; k < delta_grid.size(); ++k) {
    const double d = (plus.r2[k].imag() - minus.r2[k].imag()) / (2.0 * fd_step);
    out.dim_r2.push_back(d);
    const double eta_rad = d != 0.0 ? ratio * noise.density() / (V2 * std::abs(d)) : INFINITY;
    out.eta_r_mdeg.push_back(1e3 * rad_to_deg(eta_rad));
    if (std::abs(d) > std::abs(out.dim_r2[out.best])) out.best = k;
  }
  return out;
}

double eit_degradation(const EnsembleSet& set, double omega_R, double delta_T, const SlopeOptions& opts,
                       bool relock) {
  if (!(omega_R >= 0.0) || !std::isfinite(omega_R)) throw InvalidArgument("eit_degradation: omega_R must be >= 0");
  if (omega_R == 0.0) return 0.0;
  if (delta_T == 0.0) throw InvalidArgument("eit_degradation: delta_T = 0 with omega_R > 0 (degenerate tones)");
  EnsembleSet with = set;
  auto& s = with.members.at(opts.member).spin;
  const double stark = omega_R * omega_R / (4.0 * delta_T);
  s.level_shift(2) += stark;
  s.level_shift(0) -= stark;
  s.aux_pump += omega_R * omega_R * s.gamma / (4.0 * delta_T * delta_T + s.gamma * s.gamma);
  // The |1> light shift moves the two-photon resonance by +stark; a locked readout follows it.
  if (relock) s.delta_2 -= stark;
  const double s0 = signal_slope(set, opts).dim_r;
  const double s1 = signal_slope(with, opts).dim_r;
  if (s1 == 0.0) throw SolverError(SolverError::Kind::Singular, "eit_degradation: slope vanishes with the auxiliary tone");
  // eta is inversely proportional to |S| at fixed probe voltage.
  return std::abs(s0) / std::abs(s1) - 1.0;
}

double CrosstalkMatrix::max_offdiag_ratio() const {
  double worst = 0.0;
  for (int i = 0; i < M.rows(); ++i)
    for (int j = 0; j < M.cols(); ++j)
      if (i != j) worst = std::max(worst, std::abs(M(i, j) / M(i, i)));
  return worst;
}

bool CrosstalkMatrix::diagonally_dominant() const {
  for (int i = 0; i < M.rows(); ++i) {
    double off = 0.0;
    for (int j = 0; j < M.cols(); ++j)
      if (j != i) off += std::abs(M(i, j));
    if (!(std::abs(M(i, i)) > off)) return false;
  }
  return true;
}

EnsembleSet vector_set(const LambdaParams& base, const std::vector<double>& offsets, std::size_t probe,
                       double n_per_member) {
  if (probe >= offsets.size()) throw InvalidArgument("vector_set: probe index out of range");
  const auto axes = tetrahedral_axes();
  EnsembleSet set;
  set.cavity = base.cavity();
  set.cavity.delta = base.delta - offsets[probe];
  for (std::size_t j = 0; j < offsets.size(); ++j) {
    Member m;
    m.spin = base.spin();
    m.spin.n_spins = n_per_member > 0.0 ? n_per_member : base.N / 2.0;
    m.spin.delta_s = base.delta_s + offsets[j] - offsets[probe];
    m.nv_axis = axes[j % axes.size()];
    set.members.push_back(m);
  }
  return set;
}

CrosstalkMatrix crosstalk_matrix(const LambdaParams& base, const std::vector<double>& offsets,
                                 double n_per_member, const SlopeOptions& opts, int workers) {
  const std::size_t M = offsets.size();
  if (M == 0) throw InvalidArgument("crosstalk_matrix: no members");
  std::vector<double> sorted = offsets;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t k = 1; k < M; ++k)
    if (sorted[k] - sorted[k - 1] < base.Gamma) {
      std::ostringstream os;
      os << "crosstalk_matrix: member separation " << (sorted[k] - sorted[k - 1]) / kTwoPi
         << " Hz is below Gamma/2pi = " << base.Gamma / kTwoPi << " Hz";
      throw InvalidArgument(os.str());
    }

  CrosstalkMatrix out;
  out.offsets = offsets;
  out.M.resize(M, M);
  const double V = std::sqrt(drive_to_watt(base.J, base.kappa_c1) * NoiseModel{}.impedance);
  std::vector<std::string> errors(M * M);
  const long total = static_cast<long>(M * M);
#pragma omp parallel for schedule(dynamic) num_threads(thread_count(workers))
  for (long k = 0; k < total; ++k) {
    const std::size_t i = k / M, j = k % M;
    try {
      const EnsembleSet set = vector_set(base, offsets, i, n_per_member);
      SlopeOptions o = opts;
      o.member = j;
      o.guess.reset();
      out.M(i, j) = slope_to_signal(signal_slope(set, o).dim_r, V);
    } catch (const Error& e) {
      errors[k] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw SolverError(SolverError::Kind::NoConvergence, "crosstalk_matrix: " + e);
  for (std::size_t j = 0; j < M; ++j) out.axes.push_back(vector_set(base, offsets, 0, n_per_member).members[j].nv_axis);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(out.M);
  const auto& sv = svd.singularValues();
  out.condition = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : INFINITY;
  return out;
}

std::vector<double> project_rotation(const Eigen::Vector3d& rate, const std::vector<Eigen::Vector3d>& axes) {
  std::vector<double> d;
  for (const auto& n : axes) d.push_back(rotation_shift(rate, n).delta_D);
  return d;
}

Eigen::Vector3d reconstruct_rotation(const std::vector<double>& readings, const std::vector<Eigen::Vector3d>& axes,
                                     const std::optional<Eigen::MatrixXd>& crosstalk) {
  const std::size_t n = axes.size();
  if (n < 3) throw InvalidArgument("reconstruct_rotation: need at least 3 axes");
  if (readings.size() != n) throw InvalidArgument("reconstruct_rotation: one reading per axis required");
  Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(readings.data(), static_cast<long>(n));
  if (crosstalk) {
    const Eigen::MatrixXd& M = *crosstalk;
    if (M.rows() != static_cast<long>(n) || M.cols() != static_cast<long>(n))
      throw InvalidArgument("reconstruct_rotation: crosstalk matrix size mismatch");
    Eigen::MatrixXd Mn = M;
    for (long i = 0; i < Mn.rows(); ++i) {
      if (M(i, i) == 0.0) throw SolverError(SolverError::Kind::Singular, "reconstruct_rotation: zero diagonal response");
      Mn.row(i) /= M(i, i);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Mn, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double cond = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : INFINITY;
    if (!(cond < 1e12)) {
      std::ostringstream os;
      os << "reconstruct_rotation: crosstalk matrix is singular (condition number " << cond
         << "), refusing elimination";
      throw SolverError(SolverError::Kind::Singular, os.str());
    }
    d = svd.solve(d);
  }
  Eigen::MatrixXd U(n, 3);
  for (std::size_t j = 0; j < n; ++j) {
    const double len = axes[j].norm();
    if (std::abs(len - 1.0) > 1e-9) throw InvalidArgument("reconstruct_rotation: axes must be unit vectors");
    U.row(j) = -axes[j].transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(U, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv(2) <= 1e-9 * sv(0))
    throw SolverError(SolverError::Kind::Singular, "reconstruct_rotation: axes are coplanar (rank-deficient)");
  return svd.solve(d);
}

double comagnetometer_correct(double delta_d_raw, double delta_e_measured, const NVParams& nv) {
  return delta_d_raw - (nv.gamma_n / nv.gamma_e) * delta_e_measured;
}

}  // namespace nvgyro
