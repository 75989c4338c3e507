#pragma once

#include <optional>
#include <vector>

#include "nvgyro/mean_field.hpp"

namespace nvgyro {

/// Default microwave drive frequency used for the dBm -> J conversion.
inline constexpr double kDefaultOmegaD = kTwoPi * 2.87e9;

/// J = sqrt(kappa_c1 P / (hbar omega_d)), P converted from dBm.
double power_to_drive(double p_dbm, double kappa_c1, double omega_d = kDefaultOmegaD);
/// Inverse of power_to_drive, in watts.
double drive_to_watt(double J, double kappa_c1, double omega_d = kDefaultOmegaD);

/// Single-ensemble parameter set. Angular units throughout.
struct LambdaParams {
  double delta = 0.0;
  double delta_s = 0.0;
  double delta_2 = 0.0;
  double g_s = 0.0;
  double N = 2.4e15;
  double omega_2 = 0.0;
  double J = 0.0;
  double kappa_c = kTwoPi * 0.5e6;
  double kappa_c1 = kTwoPi * 0.5e6;
  double Gamma = kTwoPi * 0.33e6;
  double Gamma_n = kTwoPi * 80.0;
  double gamma_p = kTwoPi * 1e4;
  double gamma_th = 200.0;
  double repump_to_2 = 0.7;
  double nuclear_flip_fraction = 1.0;

  double kappa() const { return kappa_c + kappa_c1; }
  double cooperativity() const { return 4.0 * g_s * g_s * N / (kappa() * Gamma); }
  /// Sets g_s so that 4 g_s^2 N / (kappa Gamma) = C.
  void set_cooperativity(double C);

  /// C = 20, N = 2.4e15, P = -55 dBm, Omega_2 = 0.
  static LambdaParams defaults();

  SpinParams spin() const;
  CavityParams cavity() const;
  EnsembleSet ensemble() const;
};

/// Time derivative of (alpha, rho) for a single ensemble.
SystemState equations_of_motion(const LambdaParams& p, const SystemState& state);

SteadyStateSolution solve_steady_state(const LambdaParams& p, const SolveOptions& opts = {});
TimeTrace integrate(const LambdaParams& p, const SystemState& initial, double t_final,
                    const IntegrateOptions& opts = {});

/// Re-applies the regime rule to a solution given rho_1e at Omega_2 = 0.
Regime classify_regime(const SteadyStateSolution& sol, cd reference_rho_e1, double growth_tol,
                       double tol_eit = 1e-2, std::size_t member = 0);

/// rho_1e of the probed member with Omega_2 switched off.
cd reference_rho_e1(const EnsembleSet& set, std::size_t member = 0);

struct PerfectEitPoint {
  double p_dbm = 0.0;
  double omega_2 = 0.0;  // rad/s; NaN when the bracket had no sign change
  bool found = false;
  double im_rho_e1 = 0.0;
  double ref_abs = 0.0;
};

struct BracketOptions {
  double omega_lo = kTwoPi * 10.0;
  double omega_hi = kTwoPi * 2e5;
  int scan_points = 48;
  double rel_tol = 1e-9;
};

struct SpectrumPoint {
  double probe_offset = 0.0;  // probe frequency shift from the base point, rad/s
  double delta = 0.0;         // cavity - probe at this point, rad/s
  cd r{0.0, 0.0};
  double intracavity = 0.0;   // |alpha|^2 / |alpha_empty(0)|^2
  Regime regime = Regime::EIT;
  bool ok = false;
};

/// Probe scan with the drive held fixed: a probe shift d moves Delta, Delta_s
/// and Delta_2 by -d together. Solutions are continued from point to point.
std::vector<SpectrumPoint> probe_spectrum(const LambdaParams& base, const std::vector<double>& probe_offsets);

/// Transparency peak at zero probe offset in a probe_spectrum scan.
struct EitFeature {
  std::size_t center = 0;  // index of the point closest to zero offset
  double peak = 0.0;       // intracavity intensity there
  double floor = 0.0;      // smallest intracavity intensity in the scan
  double contrast = 0.0;   // peak / floor
  double fwhm = 0.0;       // rad/s, full width at (peak + floor) / 2
  bool found = false;
};
EitFeature eit_feature(const std::vector<SpectrumPoint>& scan);

/// Omega_2 at which Im rho_1e changes sign from negative to positive, for each power.
std::vector<PerfectEitPoint> perfect_eit_curve(const LambdaParams& base, const std::vector<double>& p_dbm,
                                               const BracketOptions& opts = {});

/// Same root for a single fixed power (J already set in base).
PerfectEitPoint perfect_eit_point(const LambdaParams& base, const BracketOptions& opts = {});

}  // namespace nvgyro
