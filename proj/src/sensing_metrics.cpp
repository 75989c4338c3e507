#include "nvgyro/sensing_metrics.hpp"

#include <omp.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "nvgyro/error.hpp"

namespace nvgyro {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double im_r_at(const EnsembleSet& set, const SlopeOptions& opts, double delta_d) {
  EnsembleSet s = set;
  apply_difference_shift(s.members.at(opts.member).spin, delta_d, opts.path);
  SolveOptions so;
  so.classify = false;
  so.guess = opts.guess;
  so.probed_member = opts.member;
  const auto sol = solve_steady_state(s, so);
  if (sol.regime == Regime::Oscillation)
    throw SolverError(SolverError::Kind::LimitCycle, "signal_slope: shifted operating point is unstable");
  return sol.r.imag();
}

double slope_at(const EnsembleSet& set, const SlopeOptions& opts, double center, double h) {
  return (im_r_at(set, opts, center + h) - im_r_at(set, opts, center - h)) / (2.0 * h);
}

}  // namespace

double NoiseModel::johnson_nyquist() const { return std::sqrt(4.0 * kBoltzmann * temperature * impedance); }

void NoiseModel::validate() const {
  if (!(xi > 0.0 && xi <= 1.0)) throw InvalidArgument("noise: xi must lie in (0, 1]");
  if (!(temperature > 0.0) || !(impedance > 0.0)) throw InvalidArgument("noise: T and Z must be > 0");
}

void apply_difference_shift(SpinParams& spin, double delta_d, ShiftPath path) {
  // A rotation R_z moves |1> and |e> (m_I = -1) by -R_z and leaves |2> fixed; delta_D = -R_z.
  if (path == ShiftPath::TwoPhotonDetuning) {
    spin.delta_2 -= delta_d;
  } else {
    spin.level_shift(0) += delta_d;
    spin.level_shift(2) += delta_d;
  }
}

void apply_common_shift(SpinParams& spin, double delta_c) { spin.delta_s += delta_c; }

SlopeResult signal_slope(const EnsembleSet& set, const SlopeOptions& opts) {
  const double gn = set.members.at(opts.member).spin.gamma_n;
  if (gn > 0.0 && (opts.fd_step < gn / 100.0 * (1 - 1e-12) || opts.fd_step > gn / 4.0 * (1 + 1e-12))) {
    std::ostringstream os;
    os << "signal_slope: fd_step " << opts.fd_step << " rad/s outside [Gamma_n/100, Gamma_n/4]";
    throw InvalidArgument(os.str());
  }
  // Halve the step until two successive central differences agree, staying
  // above Gamma_n/100.
  const double floor = gn > 0.0 ? gn / 100.0 * (1 - 1e-12) : 0.0;
  SlopeResult r;
  double h = opts.fd_step;
  r.dim_r = slope_at(set, opts, 0.0, h);
  for (;;) {
    r.dim_r_half = slope_at(set, opts, 0.0, h / 2.0);
    const double scale = std::max(std::abs(r.dim_r), std::abs(r.dim_r_half));
    if (std::abs(r.dim_r - r.dim_r_half) <= opts.richardson_tol * scale || scale == 0.0) break;
    if (h / 4.0 < floor) {
      std::ostringstream os;
      os.precision(6);
      os << "signal_slope: finite difference not converged (h: " << r.dim_r << ", h/2: " << r.dim_r_half
         << " per rad/s)";
      throw SolverError(SolverError::Kind::NoConvergence, os.str());
    }
    h /= 2.0;
    r.dim_r = r.dim_r_half;
  }
  // Richardson extrapolation of the two central differences.
  r.dim_r = (4.0 * r.dim_r_half - r.dim_r) / 3.0;
  return r;
}

double probe_voltage(double p_dbm, double impedance) { return std::sqrt(dbm_to_watt(p_dbm) * impedance); }

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw InvalidArgument("loglog_slope: size mismatch");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) continue;
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  const double den = n * sxx - sx * sx;
  if (n < 2 || den == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (n * sxy - sx * sy) / den;
}

double eta_sql(double n_spins, double t2_star) {
  if (!(n_spins > 0.0) || !(t2_star > 0.0)) throw InvalidArgument("eta_sql: N and T2* must be > 0");
  return 1.0 / std::sqrt(n_spins * t2_star);
}

SensitivityReport sensitivity(double S, double V, const NoiseModel& noise, double n_spins, double t2_star) {
  noise.validate();
  if (S == 0.0 || !std::isfinite(S)) throw SolverError(SolverError::Kind::Singular, "sensitivity: S = 0 gives infinite eta");
  SensitivityReport rep;
  rep.S = S;
  rep.V = V;
  rep.noise = noise.density();
  rep.eta_rad = kTwoPi * rep.noise / std::abs(S);
  rep.eta_deg = rad_to_deg(rep.eta_rad);
  rep.eta_mdeg = 1e3 * rep.eta_deg;
  rep.eta_sql_rad = eta_sql(n_spins, t2_star);
  rep.eta_sql_mdeg = 1e3 * rad_to_deg(rep.eta_sql_rad);
  rep.sigma_n = rep.eta_rad / rep.eta_sql_rad;
  return rep;
}

double dynamic_range(const EnsembleSet& set, const SlopeOptions& opts, double max_span_hz) {
  const double h = opts.fd_step;
  const double s0 = slope_at(set, opts, 0.0, h);
  if (s0 == 0.0) return 0.0;
  auto inside = [&](double d) {
    try {
      return std::abs(slope_at(set, opts, d, h) - s0) <= 0.1 * std::abs(s0);
    } catch (const SolverError&) {
      return false;
    }
  };
  const double limit = kTwoPi * max_span_hz / 2.0;
  auto edge = [&](double sign) {
    double lo = 0.0, step = h;
    double hi = lo + step;
    while (inside(sign * hi)) {
      lo = hi;
      step *= 2.0;
      hi = lo + step;
      if (hi > limit) return limit;
    }
    for (int it = 0; it < 40 && hi - lo > 1e-3 * h; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (inside(sign * mid))
        lo = mid;
      else
        hi = mid;
    }
    return 0.5 * (lo + hi);
  };
  return (edge(1.0) + edge(-1.0)) / kTwoPi;
}

SweepCell evaluate_cell(const LambdaParams& base, double p_dbm, double omega_2, const SweepSettings& s,
                        std::optional<cd> reference) {
  SweepCell c;
  c.p_dbm = p_dbm;
  c.omega_2 = omega_2;
  c.cooperativity = base.cooperativity();
  c.eta_mdeg = kNaN;
  c.sigma_n = kNaN;
  try {
    LambdaParams p = base;
    p.J = power_to_drive(p_dbm, p.kappa_c1);
    p.omega_2 = omega_2;
    SolveOptions so;
    so.reference_rho_e1 = reference;
    const auto sol = solve_steady_state(p, so);
    c.regime = sol.regime;
    c.alpha0 = sol.alpha0;
    // An operating point must stay locked over the two-photon window it measures.
    if (sol.regime != Regime::Oscillation && s.lock_offset != 0.0) {
      LambdaParams q = p;
      q.delta_2 += s.lock_offset;
      SolveOptions lo;
      lo.classify = false;
      lo.guess = sol.state.alpha;
      if (solve_steady_state(q, lo).regime == Regime::Oscillation) c.regime = Regime::Oscillation;
    }
    if (c.regime != Regime::Oscillation) {
      SlopeOptions opt;
      opt.fd_step = s.fd_step;
      opt.guess = sol.state.alpha;
      const auto sl = signal_slope(p.ensemble(), opt);
      const double V = probe_voltage(p_dbm, s.noise.impedance);
      c.S = slope_to_signal(sl.dim_r, V);
      const auto rep = sensitivity(c.S, V, s.noise, p.N, 2.0 / p.Gamma_n);
      c.eta_mdeg = rep.eta_mdeg;
      c.sigma_n = rep.sigma_n;
    }
    c.ok = true;
  } catch (const Error& e) {
    c.ok = false;
    c.error = e.what();
  }
  return c;
}

namespace {

void summarize(SweepResult& r) {
  const std::size_t nw = r.omega_grid.size();
  const std::size_t np = r.cells.size() / std::max<std::size_t>(nw, 1);
  r.boundary.assign(np, kNaN);
  for (std::size_t k = 0; k < r.cells.size(); ++k) {
    const auto& c = r.cells[k];
    if (!c.ok) {
      ++r.failures;
      continue;
    }
    if (c.regime == Regime::Oscillation) {
      double& b = r.boundary[k / nw];
      if (std::isnan(b) || c.omega_2 < b) b = c.omega_2;
      continue;
    }
    if (!std::isfinite(c.eta_mdeg)) continue;
    auto better = [&](const std::optional<std::size_t>& cur) { return !cur || c.eta_mdeg < r.cells[*cur].eta_mdeg; };
    if (better(r.argmin)) r.argmin = k;
    if (c.regime == Regime::MWI) {
      if (better(r.best_mwi)) r.best_mwi = k;
    } else if (better(r.best_eit)) {
      r.best_eit = k;
    }
  }
}

template <bool Parallel>
SweepResult run_sweep(const LambdaParams& base, const std::vector<double>& p_dbm,
                      const std::vector<double>& omega_2, const SweepSettings& s) {
  for (std::size_t i = 1; i < p_dbm.size(); ++i)
    if (!(p_dbm[i] > p_dbm[i - 1])) throw InvalidArgument("sweep: power grid must be strictly increasing");
  for (std::size_t i = 1; i < omega_2.size(); ++i)
    if (!(omega_2[i] > omega_2[i - 1])) throw InvalidArgument("sweep: Omega_2 grid must be strictly increasing");
  s.noise.validate();

  SweepResult r;
  r.p_grid = p_dbm;
  r.omega_grid = omega_2;
  const long np = static_cast<long>(p_dbm.size()), nw = static_cast<long>(omega_2.size());
  std::vector<std::optional<cd>> refs(p_dbm.size());
  r.cells.resize(p_dbm.size() * omega_2.size());
  const int workers = s.workers > 0 ? s.workers : omp_get_max_threads();

  auto ref_row = [&](long i) {
    try {
      LambdaParams p = base;
      p.J = power_to_drive(p_dbm[i], p.kappa_c1);
      refs[i] = reference_rho_e1(p.ensemble());
    } catch (const Error&) {
      refs[i].reset();
    }
  };
  auto cell = [&](long k) { r.cells[k] = evaluate_cell(base, p_dbm[k / nw], omega_2[k % nw], s, refs[k / nw]); };

  if constexpr (Parallel) {
#pragma omp parallel for schedule(dynamic) num_threads(workers)
    for (long i = 0; i < np; ++i) ref_row(i);
#pragma omp parallel for schedule(dynamic) num_threads(workers)
    for (long k = 0; k < np * nw; ++k) cell(k);
  } else {
    (void)workers;
    for (long i = 0; i < np; ++i) ref_row(i);
    for (long k = 0; k < np * nw; ++k) cell(k);
  }
  summarize(r);
  return r;
}

template <bool Parallel>
CoopSweepResult run_coop(const LambdaParams& base, const std::vector<double>& c_grid,
                         const std::vector<double>& p_dbm, const std::vector<double>& omega_2,
                         const SweepSettings& s) {
  for (std::size_t i = 1; i < c_grid.size(); ++i)
    if (!(c_grid[i] > c_grid[i - 1])) throw InvalidArgument("sweep_cooperativity: C grid must be strictly increasing");
  if (!(base.g_s > 0.0)) throw InvalidArgument("sweep_cooperativity: base g_s must be > 0");
  CoopSweepResult out;
  out.oscillation_onset = kNaN;
  const std::size_t nw = omega_2.size();
  for (double C : c_grid) {
    if (!(C > 0.0)) throw InvalidArgument("sweep_cooperativity: C must be > 0");
    LambdaParams p = base;
    p.N = C * p.kappa() * p.Gamma / (4.0 * p.g_s * p.g_s);
    const SweepResult sr = run_sweep<Parallel>(p, p_dbm, omega_2, s);
    CoopPoint pt;
    pt.cooperativity = C;
    pt.n_spins = p.N;
    for (const auto& c : sr.cells)
      if (c.ok && c.regime == Regime::Oscillation) ++pt.oscillating_cells;
    if (sr.argmin) {
      pt.best = sr.cells[*sr.argmin];
      pt.has_best = true;
      const std::size_t k = *sr.argmin, i = k / nw, j = k % nw;
      auto osc = [&](std::size_t ii, std::size_t jj) {
        const auto& c = sr.cells[ii * nw + jj];
        return c.ok && c.regime == Regime::Oscillation;
      };
      pt.on_oscillation_boundary = (j + 1 < nw && osc(i, j + 1)) || (j > 0 && osc(i, j - 1)) ||
                                   (i + 1 < p_dbm.size() && osc(i + 1, j)) || (i > 0 && osc(i - 1, j));
    }
    if (pt.on_oscillation_boundary && std::isnan(out.oscillation_onset)) out.oscillation_onset = C;
    out.points.push_back(pt);
  }
  for (std::size_t i = 0; i < out.points.size(); ++i)
    if (out.points[i].has_best &&
        (!out.argmin || out.points[i].best.sigma_n < out.points[*out.argmin].best.sigma_n))
      out.argmin = i;
  return out;
}

}  // namespace

SweepResult sweep_power_drive(const LambdaParams& base, const std::vector<double>& p_dbm,
                              const std::vector<double>& omega_2, const SweepSettings& s) {
  return run_sweep<true>(base, p_dbm, omega_2, s);
}

SweepResult sweep_power_drive_serial(const LambdaParams& base, const std::vector<double>& p_dbm,
                                     const std::vector<double>& omega_2, const SweepSettings& s) {
  return run_sweep<false>(base, p_dbm, omega_2, s);
}

CoopSweepResult sweep_cooperativity(const LambdaParams& base, const std::vector<double>& c_grid,
                                    const std::vector<double>& p_dbm, const std::vector<double>& omega_2,
                                    const SweepSettings& s) {
  return run_coop<true>(base, c_grid, p_dbm, omega_2, s);
}

CoopSweepResult sweep_cooperativity_serial(const LambdaParams& base, const std::vector<double>& c_grid,
                                           const std::vector<double>& p_dbm,
                                           const std::vector<double>& omega_2, const SweepSettings& s) {
  return run_coop<false>(base, c_grid, p_dbm, omega_2, s);
}

}  // namespace nvgyro
