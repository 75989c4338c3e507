#include "nvgyro/lambda_dynamics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "nvgyro/error.hpp"

namespace nvgyro {

double power_to_drive(double p_dbm, double kappa_c1, double omega_d) {
  if (!std::isfinite(p_dbm)) {
    if (p_dbm == -std::numeric_limits<double>::infinity()) return 0.0;
    throw InvalidArgument("power_to_drive: P must be finite");
  }
  if (!(kappa_c1 >= 0.0) || !(omega_d > 0.0)) throw InvalidArgument("power_to_drive: bad rates");
  return std::sqrt(kappa_c1 * dbm_to_watt(p_dbm) / (kHbar * omega_d));
}

double drive_to_watt(double J, double kappa_c1, double omega_d) {
  if (!(kappa_c1 > 0.0) || !(omega_d > 0.0)) throw InvalidArgument("drive_to_watt: bad rates");
  return J * J * kHbar * omega_d / kappa_c1;
}

void LambdaParams::set_cooperativity(double C) {
  if (!(C >= 0.0) || !(N > 0.0)) throw InvalidArgument("set_cooperativity: need C >= 0 and N > 0");
  g_s = std::sqrt(C * kappa() * Gamma / (4.0 * N));
}

LambdaParams LambdaParams::defaults() {
  LambdaParams p;
  p.set_cooperativity(20.0);
  p.J = power_to_drive(-55.0, p.kappa_c1);
  return p;
}

SpinParams LambdaParams::spin() const {
  SpinParams s;
  s.delta_s = delta_s;
  s.delta_2 = delta_2;
  s.g_s = g_s;
  s.n_spins = N;
  s.omega_2 = omega_2;
  s.gamma = Gamma;
  s.gamma_n = Gamma_n;
  s.gamma_p = gamma_p;
  s.gamma_th = gamma_th;
  s.repump_to_2 = repump_to_2;
  s.nuclear_flip_fraction = nuclear_flip_fraction;
  return s;
}

CavityParams LambdaParams::cavity() const {
  CavityParams c;
  c.delta = delta;
  c.kappa_c = kappa_c;
  c.kappa_c1 = kappa_c1;
  c.drive = J;
  return c;
}

EnsembleSet LambdaParams::ensemble() const {
  EnsembleSet set;
  set.cavity = cavity();
  Member m;
  m.spin = spin();
  set.members.push_back(m);
  return set;
}

SystemState equations_of_motion(const LambdaParams& p, const SystemState& state) {
  if (state.rho.size() != 1) throw InvalidArgument("equations_of_motion: expected one density matrix");
  const MeanFieldModel model(p.ensemble());
  SystemState d;
  const cd i(0.0, 1.0);
  d.alpha = -(i * p.delta + p.kappa() / 2.0) * state.alpha + p.J - i * p.g_s * p.N * state.rho[0](2, 0);
  d.rho.push_back(model.member_derivative(0, state.alpha, state.rho[0]));
  return d;
}

SteadyStateSolution solve_steady_state(const LambdaParams& p, const SolveOptions& opts) {
  return solve_steady_state(p.ensemble(), opts);
}

TimeTrace integrate(const LambdaParams& p, const SystemState& initial, double t_final,
                    const IntegrateOptions& opts) {
  return integrate(p.ensemble(), initial, t_final, opts);
}

Regime classify_regime(const SteadyStateSolution& sol, cd reference, double growth_tol, double tol_eit,
                       std::size_t member) {
  return classify(sol.jacobian_eigs, growth_tol, sol.gain_ratio, sol.state.rho.at(member)(2, 0), reference, tol_eit);
}

cd reference_rho_e1(const EnsembleSet& set, std::size_t member) {
  EnsembleSet bare = set;
  for (auto& m : bare.members) m.spin.omega_2 = 0.0;
  SolveOptions o;
  o.classify = false;
  o.probed_member = member;
  return solve_steady_state(bare, o).state.rho.at(member)(2, 0);
}

std::vector<SpectrumPoint> probe_spectrum(const LambdaParams& base, const std::vector<double>& probe_offsets) {
  const cd empty0 = base.J / (base.kappa() / 2.0);
  const double norm = std::norm(empty0) > 0.0 ? std::norm(empty0) : 1.0;
  std::vector<SpectrumPoint> out;
  out.reserve(probe_offsets.size());
  std::optional<cd> guess, ref_guess;
  for (double d : probe_offsets) {
    SpectrumPoint pt;
    pt.probe_offset = d;
    LambdaParams p = base;
    p.delta -= d;
    p.delta_s -= d;
    p.delta_2 -= d;
    pt.delta = p.delta;
    try {
      LambdaParams bare = p;
      bare.omega_2 = 0.0;
      SolveOptions ro;
      ro.classify = false;
      ro.guess = ref_guess;
      const auto ref = solve_steady_state(bare, ro);
      ref_guess = ref.state.alpha;
      SolveOptions o;
      o.guess = guess;
      o.reference_rho_e1 = ref.state.rho[0](2, 0);
      const auto sol = solve_steady_state(p, o);
      guess = sol.state.alpha;
      pt.r = sol.r;
      pt.intracavity = std::norm(sol.state.alpha) / norm;
      pt.regime = sol.regime;
      pt.ok = true;
    } catch (const SolverError& e) {
      warn(std::string("probe_spectrum: ") + e.what());
      guess.reset();
    }
    out.push_back(pt);
  }
  return out;
}

EitFeature eit_feature(const std::vector<SpectrumPoint>& scan) {
  EitFeature f;
  if (scan.empty()) return f;
  double best = std::numeric_limits<double>::infinity();
  f.floor = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < scan.size(); ++i) {
    if (!scan[i].ok) continue;
    f.floor = std::min(f.floor, scan[i].intracavity);
    if (std::abs(scan[i].probe_offset) < best) {
      best = std::abs(scan[i].probe_offset);
      f.center = i;
    }
  }
  if (!std::isfinite(best) || !scan[f.center].ok) return f;
  f.peak = scan[f.center].intracavity;
  f.contrast = f.floor > 0.0 ? f.peak / f.floor : std::numeric_limits<double>::infinity();
  const double half = 0.5 * (f.peak + f.floor);
  // Walk outward to the first crossing of the half level and interpolate.
  auto crossing = [&](int step) -> std::optional<double> {
    for (long i = static_cast<long>(f.center); i + step >= 0 && i + step < static_cast<long>(scan.size()); i += step) {
      const auto& a = scan[static_cast<std::size_t>(i)];
      const auto& b = scan[static_cast<std::size_t>(i + step)];
      if (!a.ok || !b.ok) return std::nullopt;
      if (b.intracavity <= half) {
        const double t = (a.intracavity - half) / (a.intracavity - b.intracavity);
        return a.probe_offset + t * (b.probe_offset - a.probe_offset);
      }
    }
    return std::nullopt;
  };
  const auto lo = crossing(-1), hi = crossing(+1);
  if (!lo || !hi || !(f.peak > f.floor)) return f;
  f.fwhm = *hi - *lo;
  f.found = true;
  return f;
}

PerfectEitPoint perfect_eit_point(const LambdaParams& base, const BracketOptions& opts) {
  PerfectEitPoint pt;
  pt.omega_2 = std::numeric_limits<double>::quiet_NaN();
  const cd ref = reference_rho_e1(base.ensemble());
  pt.ref_abs = std::abs(ref);

  std::optional<cd> guess;
  auto im_at = [&](double omega) {
    LambdaParams p = base;
    p.omega_2 = omega;
    SolveOptions o;
    o.classify = false;
    o.guess = guess;
    const auto sol = solve_steady_state(p, o);
    guess = sol.state.alpha;
    return sol.state.rho[0](2, 0).imag();
  };

  const int n = std::max(opts.scan_points, 2);
  const double ratio = std::log(opts.omega_hi / opts.omega_lo) / (n - 1);
  double lo = opts.omega_lo, f_lo = im_at(lo);
  double hi = 0.0;
  bool bracketed = false;
  for (int k = 1; k < n; ++k) {
    const double w = opts.omega_lo * std::exp(ratio * k);
    const double f = im_at(w);
    if (f_lo < 0.0 && f >= 0.0) {
      hi = w;
      bracketed = true;
      break;
    }
    lo = w;
    f_lo = f;
  }
  if (!bracketed) return pt;

  std::optional<cd> lo_guess = guess;
  while ((hi - lo) > opts.rel_tol * hi) {
    const double mid = 0.5 * (lo + hi);
    guess = lo_guess;
    const double f = im_at(mid);
    if (f < 0.0) {
      lo = mid;
      lo_guess = guess;
    } else {
      hi = mid;
    }
  }
  pt.omega_2 = 0.5 * (lo + hi);
  pt.found = true;
  guess = lo_guess;
  pt.im_rho_e1 = im_at(pt.omega_2);
  return pt;
}

std::vector<PerfectEitPoint> perfect_eit_curve(const LambdaParams& base, const std::vector<double>& p_dbm,
                                               const BracketOptions& opts) {
  std::vector<PerfectEitPoint> out;
  for (double P : p_dbm) {
    LambdaParams p = base;
    p.J = power_to_drive(P, p.kappa_c1);
    PerfectEitPoint pt = perfect_eit_point(p, opts);
    pt.p_dbm = P;
    if (!pt.found) {
      std::ostringstream os;
      os << "perfect_eit_curve: no sign change of Im rho_1e in the Omega_2 bracket at P = " << P << " dBm";
      warn(os.str());
    }
    out.push_back(pt);
  }
  return out;
}

}  // namespace nvgyro
