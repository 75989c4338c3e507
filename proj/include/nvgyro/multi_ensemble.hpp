#pragma once

// Several spin subensembles in one cavity: hyperfine comagnetometry, a weak
// second probe tone, and vector rotation readout with crosstalk elimination.

#include <optional>
#include <vector>

#include "nvgyro/nv_structure.hpp"
#include "nvgyro/sensing_metrics.hpp"

namespace nvgyro {

/// Coupled fixed point of all members; same contract as the single-ensemble solver.
inline SteadyStateSolution solve_multi_steady_state(const EnsembleSet& set, const SolveOptions& opts = {}) {
  return solve_steady_state(set, opts);
}

// ---- comagnetometer layout -----------------------------------------------

struct ComagLayout {
  double hyperfine_split = kTwoPi * 2.16e6;  // |A_par|, rad/s
  // Spins per hyperfine subensemble; 0 takes base.N / 2 (C = 10 each at the C = 20 defaults).
  double n_per_member = 0.0;
};

/// Three hyperfine members 1+, 2+, 3+ (m_I = -1, 0, +1) for a spin-cavity
/// detuning delta_sc of the 1+ transition. Member 0 is the Lambda system
/// {|0,-1>, |0,0>, |+1,-1>}; member 1 is the 2+ two-level transition whose spin
/// number follows the |0,0> population of member 0; member 2 is 3+.
/// The Omega_2 drive stays on its transition, so member 0 has Delta_2 = Delta_s + base.delta_2.
EnsembleSet comag_set(const LambdaParams& base, double delta_sc, const ComagLayout& layout = {});

struct MapCell {
  double delta = 0.0;     // cavity - probe, rad/s
  double delta_sc = 0.0;  // 1+ transition - cavity, rad/s
  cd r{0.0, 0.0};
  double abs_r2 = 0.0;    // |r|^2
  Regime regime = Regime::EIT;
  bool ok = false;
};

/// Probe reflection over (Delta, delta_sc), row-major in delta_sc.
std::vector<MapCell> reflection_map(const LambdaParams& base, const std::vector<double>& delta_grid,
                                    const std::vector<double>& delta_sc_grid, const ComagLayout& layout = {},
                                    int workers = 0);

struct CrossingSplitting {
  std::size_t member = 0;
  double lower = 0.0;  // rad/s
  double upper = 0.0;
  double splitting = 0.0;
  bool found = false;
};

/// Distance between the two reflection dips of the avoided crossing of one
/// member, with its bare transition on the cavity. Dips within Gamma/2 of the
/// center are ignored (EIT window).
CrossingSplitting avoided_crossing(const LambdaParams& base, std::size_t member, const ComagLayout& layout = {},
                                   double half_span = kTwoPi * 1.6e6, int points = 1601);

// ---- second probe tone -----------------------------------------------------

struct SecondToneResponse {
  std::vector<double> delta;   // tone - probe, rad/s
  std::vector<cd> r2;
  std::vector<cd> a_plus;      // cavity amplitude at the tone frequency
  std::vector<double> omega_R; // g |a_plus| on the probed member, rad/s
  double p2_dbm = 0.0;
  double J2 = 0.0;
};

/// Linear response of the fixed point to a cavity tone J2 exp(-i delta t).
SecondToneResponse second_tone_response(const EnsembleSet& set, const SteadyStateSolution& op,
                                        const std::vector<double>& delta_grid, double p2_dbm,
                                        double omega_d = kDefaultOmegaD);

/// Same quantity from a time-domain run with both tones, demodulated at delta.
cd two_tone_time_domain(const EnsembleSet& set, const SteadyStateSolution& op, double delta, double J2,
                        int settle_periods = 200, int window_periods = 400);

struct ComagReadout {
  std::vector<double> delta;
  std::vector<double> dim_r2;     // d Im(r2) / d Delta_s, per rad/s
  std::vector<double> eta_r_mdeg; // comagnetometer-limited rotation floor
  std::size_t best = 0;
  double p2_dbm = 0.0;
};

/// Electron-frequency readout through the second tone: slope of Im(r2) with a
/// common Delta_s shift of every member, and the resulting floor
/// eta_r = (gamma_n / gamma_e) L / (V2 |d Im r2 / d Delta_s|).
ComagReadout comag_readout(const EnsembleSet& set, const std::vector<double>& delta_grid, double p2_dbm,
                           const NoiseModel& noise, const NVParams& nv = {}, double fd_step = kTwoPi * 1e3);

/// Relative change (eta_with - eta_without) / eta_without of the EIT signal of
/// opts.member when an auxiliary tone (Rabi rate omega_R, detuning delta_T)
/// addresses it: a.c. Stark shifts +-omega_R^2 / (4 delta_T) on |e> and |1>
/// and a saturation rate omega_R^2 Gamma / (4 delta_T^2 + Gamma^2). With relock
/// the drive is retuned onto the light-shifted two-photon resonance.
double eit_degradation(const EnsembleSet& set, double omega_R, double delta_T, const SlopeOptions& opts = {},
                       bool relock = true);

// ---- vector readout --------------------------------------------------------

struct CrosstalkMatrix {
  Eigen::MatrixXd M;                  // V/Hz, probe i (row) per Delta_D of member j (column)
  double condition = 0.0;
  std::vector<double> offsets;        // rad/s
  std::vector<Eigen::Vector3d> axes;
  double max_offdiag_ratio() const;
  bool diagonally_dominant() const;
};

/// Members at the given electron-frequency offsets from the cavity, seen from
/// probe i: probe and drive i are two-photon resonant with every member.
EnsembleSet vector_set(const LambdaParams& base, const std::vector<double>& offsets, std::size_t probe,
                       double n_per_member = 0.0);

CrosstalkMatrix crosstalk_matrix(const LambdaParams& base, const std::vector<double>& offsets,
                                 double n_per_member = 0.0, const SlopeOptions& opts = {}, int workers = 0);

/// Difference-mode shifts seen by each axis for a rotation rate vector.
std::vector<double> project_rotation(const Eigen::Vector3d& rate, const std::vector<Eigen::Vector3d>& axes);

/// Least-squares rotation vector from per-axis readings Delta_D (rad/s). With a
/// crosstalk matrix the readings are taken as y_i = s_i / M_ii and unmixed first.
Eigen::Vector3d reconstruct_rotation(const std::vector<double>& readings, const std::vector<Eigen::Vector3d>& axes,
                                     const std::optional<Eigen::MatrixXd>& crosstalk = std::nullopt);

/// delta_D_raw - (gamma_n / gamma_e) delta_e.
double comagnetometer_correct(double delta_d_raw, double delta_e_measured, const NVParams& nv = {});

}  // namespace nvgyro
