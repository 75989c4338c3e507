#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nvgyro/lambda_dynamics.hpp"

namespace nvgyro {

struct NoiseModel {
  double temperature = 300.0;  // K
  double impedance = 50.0;     // ohm
  double xi = 0.45;
  double johnson_nyquist() const;  // V/sqrt(Hz)
  double density() const { return xi * johnson_nyquist(); }
  void validate() const;
};

/// Which level-energy path carries the difference-mode shift.
enum class ShiftPath { TwoPhotonDetuning, LevelEnergies };

/// Applies a difference-mode shift delta_D (rad/s) to one member.
void apply_difference_shift(SpinParams& spin, double delta_d, ShiftPath path = ShiftPath::TwoPhotonDetuning);
/// Applies a common-mode shift delta_C (rad/s): moves |e> relative to both nuclear levels.
void apply_common_shift(SpinParams& spin, double delta_c);

struct SlopeOptions {
  double fd_step = kTwoPi * 80.0 / 25.0;  // rad/s
  ShiftPath path = ShiftPath::TwoPhotonDetuning;
  std::size_t member = 0;
  double richardson_tol = 0.01;
  std::optional<cd> guess;
};

struct SlopeResult {
  double dim_r = 0.0;        // d Im(r) / d Delta_D, per rad/s
  double dim_r_half = 0.0;   // same with half the step
};

/// d Im(r)/d Delta_D by central differences, Richardson-checked.
SlopeResult signal_slope(const EnsembleSet& set, const SlopeOptions& opts = {});

/// Probe voltage sqrt(P Z) (rms).
double probe_voltage(double p_dbm, double impedance);

/// S in V/Hz from a slope per rad/s.
inline double slope_to_signal(double dim_r_per_rad, double voltage) { return voltage * kTwoPi * dim_r_per_rad; }

/// Rotation SQL 1/sqrt(N T2*) with T2* = 2/Gamma_n (rad/s/sqrt(Hz)).
double eta_sql(double n_spins, double t2_star);

struct SensitivityReport {
  double S = 0.0;  // V/Hz
  double V = 0.0;  // V rms
  double noise = 0.0;  // V/sqrt(Hz)
  double eta_rad = 0.0;   // rad/s/sqrt(Hz)
  double eta_deg = 0.0;   // deg/s/sqrt(Hz)
  double eta_mdeg = 0.0;  // mdeg/s/sqrt(Hz)
  double eta_sql_rad = 0.0;
  double eta_sql_mdeg = 0.0;
  double sigma_n = 0.0;
  double dynamic_range_hz = 0.0;
};

/// eta = 2 pi xi L_JN / |S| for S in V/Hz.
SensitivityReport sensitivity(double S, double V, const NoiseModel& noise, double n_spins, double t2_star);

/// Span of Delta_D (Hz) over which the slope stays within 10% of its value at Delta_D = 0.
double dynamic_range(const EnsembleSet& set, const SlopeOptions& opts = {}, double max_span_hz = 1e4);

// ---- sweeps --------------------------------------------------------------

struct SweepCell {
  double p_dbm = 0.0;
  double omega_2 = 0.0;  // rad/s
  double cooperativity = 0.0;
  Regime regime = Regime::EIT;
  bool ok = false;
  std::string error;
  double eta_mdeg = 0.0;  // NaN for oscillation or failed cells
  double S = 0.0;         // V/Hz
  cd alpha0{0.0, 0.0};
  double sigma_n = 0.0;
};

struct SweepSettings {
  NoiseModel noise;
  // A cell also counts as OSCILLATION when its fixed point is unstable at this
  // two-photon offset (the beat-note detuning). 0 disables the test.
  double lock_offset = kTwoPi * 80.0;
  double fd_step = kTwoPi * 80.0 / 25.0;
  int workers = 0;  // 0: all available threads
};

struct SweepResult {
  std::vector<double> p_grid;          // dBm
  std::vector<double> omega_grid;      // rad/s
  std::vector<double> c_grid;
  std::vector<SweepCell> cells;        // row-major over (first axis, omega)
  std::optional<std::size_t> argmin;
  std::optional<std::size_t> best_eit, best_mwi;
  // Smallest oscillating Omega_2 per power (rad/s); NaN when none.
  std::vector<double> boundary;
  std::size_t failures = 0;
};

/// Evaluates one (P, Omega_2) cell: steady state, regime, slope, eta.
SweepCell evaluate_cell(const LambdaParams& base, double p_dbm, double omega_2, const SweepSettings& s,
                        std::optional<cd> reference = std::nullopt);

/// OpenMP-parallel sweep over the (P, Omega_2) plane.
SweepResult sweep_power_drive(const LambdaParams& base, const std::vector<double>& p_dbm,
                              const std::vector<double>& omega_2, const SweepSettings& s);
/// Single-threaded reference implementation with identical output.
SweepResult sweep_power_drive_serial(const LambdaParams& base, const std::vector<double>& p_dbm,
                                     const std::vector<double>& omega_2, const SweepSettings& s);

/// Least-squares slope of log(y) against log(x); non-positive entries are skipped.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Per-C optimum of eta over a (P, Omega_2) subgrid. C is tuned through N at fixed g_s.
struct CoopPoint {
  double cooperativity = 0.0;
  double n_spins = 0.0;
  SweepCell best;
  bool has_best = false;
  // The best cell is adjacent (in the subgrid) to an oscillating cell.
  bool on_oscillation_boundary = false;
  std::size_t oscillating_cells = 0;
};

struct CoopSweepResult {
  std::vector<CoopPoint> points;
  // Point with the best readout fidelity (smallest sigma_n).
  std::optional<std::size_t> argmin;
  // Lowest C whose optimum borders the oscillation region; NaN when none.
  double oscillation_onset = 0.0;
};

CoopSweepResult sweep_cooperativity(const LambdaParams& base, const std::vector<double>& c_grid,
                                    const std::vector<double>& p_dbm, const std::vector<double>& omega_2,
                                    const SweepSettings& s);
CoopSweepResult sweep_cooperativity_serial(const LambdaParams& base, const std::vector<double>& c_grid,
                                           const std::vector<double>& p_dbm,
                                           const std::vector<double>& omega_2, const SweepSettings& s);

}  // namespace nvgyro
