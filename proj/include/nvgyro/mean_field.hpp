#pragma once

// Mean-field (Maxwell-Bloch) model of one cavity mode coupled to M spin
// subensembles, each described by a 3x3 density matrix on {|1>, |2>, |e>}.
// All rates and detunings are angular (rad/s).

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "nvgyro/constants.hpp"

namespace nvgyro {

using cd = std::complex<double>;

enum class Regime { EIT, PerfectEIT, MWI, Oscillation };
const char* to_string(Regime r);

enum class MemberMode { Lambda, TwoLevel };

struct CavityParams {
  double delta = 0.0;                 // cavity detuning from the probe
  double kappa_c = kTwoPi * 0.5e6;    // intrinsic loss
  double kappa_c1 = kTwoPi * 0.5e6;   // port coupling
  double drive = 0.0;                 // J
  double kappa() const { return kappa_c + kappa_c1; }
};

struct SpinParams {
  double delta_s = 0.0;
  double delta_2 = 0.0;
  double g_s = 0.0;
  double n_spins = 0.0;
  double omega_2 = 0.0;
  double gamma = kTwoPi * 0.33e6;     // FWHM of rho_1e
  double gamma_n = kTwoPi * 80.0;     // FWHM of rho_12
  double gamma_p = kTwoPi * 1e4;
  double gamma_th = 200.0;
  // Fraction of optical repolarization out of |e> that lands in |2> rather than |1>.
  double repump_to_2 = 0.7;
  // Fraction of Gamma_n carried by population-exchanging nuclear flips |1> <-> |2>;
  // the remainder is pure dephasing of |2>.
  double nuclear_flip_fraction = 1.0;
  // Extra diagonal energies of |1>, |2>, |e> added to the mean-field Hamiltonian.
  Eigen::Vector3d level_shift = Eigen::Vector3d::Zero();
  MemberMode mode = MemberMode::Lambda;
  // Extra symmetric incoherent rate |1> <-> |e> (saturation by an auxiliary tone).
  // It broadens rho_1e on top of Gamma.
  double aux_pump = 0.0;

  /// Pure dephasing rate of |e> that makes rho_1e decay at Gamma/2, clipped at 0.
  double pure_dephasing() const;
  /// True when no coherent or incoherent process reaches |2>; it is then held empty.
  bool level2_decoupled() const;
  /// Total population exit rate of |1> and |e> (for diagnostics and tests).
  double out_rate_1() const;
  double out_rate_e() const;
};

/// Makes a member's spin number follow rho_22 of another member:
/// n_spins = total_spins * rho_22(source). Used for the |0,0> hyperfine subensemble.
struct PopulationLink {
  std::size_t source = 0;
  double total_spins = 0.0;
};

struct Member {
  SpinParams spin;
  double weight = 1.0;
  Eigen::Vector3d nv_axis = Eigen::Vector3d::UnitZ();
  std::optional<PopulationLink> link;
};

struct EnsembleSet {
  CavityParams cavity;
  std::vector<Member> members;
  /// Sum over members of 4 g^2 N / (kappa Gamma), with linked members at full population.
  double cooperativity() const;
  void validate() const;
};

struct SystemState {
  cd alpha{0.0, 0.0};
  std::vector<Eigen::Matrix3cd> rho;
};

struct SteadyStateSolution {
  SystemState state;
  double residual = 0.0;
  Eigen::VectorXcd jacobian_eigs;
  Regime regime = Regime::EIT;
  cd alpha0{0.0, 0.0};
  cd r{0.0, 0.0};
  bool from_integration = false;
  // In-phase spin-sourced drive sum_m g_m N_m Im(rho_1e) relative to J. Above 1 the
  // spins alone sustain the field against cavity loss.
  double gain_ratio = 0.0;
  double max_growth_rate() const;
};

struct TimeTrace {
  std::vector<double> times;
  std::vector<cd> alpha;
  std::vector<SystemState> states;
  std::optional<double> beat_frequency;  // rad/s
};

struct SolveOptions {
  std::optional<cd> guess;
  bool classify = true;
  // rho_1e of the probed member at Omega_2 = 0; computed on demand when absent.
  std::optional<cd> reference_rho_e1;
  double tol_eit = 1e-2;
  int max_newton = 200;
  double newton_damping = 0.5;
  bool integration_fallback = true;
  std::size_t probed_member = 0;
};

struct IntegrateOptions {
  double sample_dt = 1e-5;
  double rtol = 1e-9;
  double atol = 1e-9;
  std::size_t max_steps = 200'000'000;
  bool keep_states = true;
  bool detect_beat = true;
  // Optional second probe tone J2 exp(-i delta t) added to d alpha/dt.
  cd tone_drive{0.0, 0.0};
  double tone_offset = 0.0;
};

/// Compiled form of an EnsembleSet: packs the state into a real vector and
/// evaluates the right-hand side, spin steady states and Jacobians.
class MeanFieldModel {
 public:
  explicit MeanFieldModel(EnsembleSet set);

  const EnsembleSet& set() const { return set_; }
  int dim() const { return dim_; }
  /// The cavity amplitude is stored as alpha / alpha_scale.
  double alpha_scale() const { return alpha_scale_; }

  Eigen::VectorXd pack(const SystemState& s) const;
  SystemState unpack(const Eigen::VectorXd& x) const;
  SystemState ground_state(cd alpha = cd(0.0, 0.0)) const;

  void rhs(const Eigen::VectorXd& x, Eigen::VectorXd& dx) const;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const;
  /// Eigenvalues of the Jacobian after diagonal balancing.
  Eigen::VectorXcd jacobian_eigenvalues(const Eigen::VectorXd& x) const;

  /// Steady-state spin vector of every member for a frozen cavity field, plus
  /// the cavity residual F(alpha) = d alpha / dt and its derivatives.
  struct FieldEval {
    Eigen::VectorXd x;  // full packed state with spins at their alpha-conditional steady state
    cd F;
    cd dF_dre;
    cd dF_dim;
  };
  FieldEval eval_field(cd alpha) const;

  /// d rho / dt of one member for an explicit density matrix.
  Eigen::Matrix3cd member_derivative(std::size_t m, cd alpha, const Eigen::Matrix3cd& rho) const;

  int member_offset(std::size_t m) const { return offset_[m]; }
  int member_vars(std::size_t m) const { return nvars_[m]; }
  double member_spins(std::size_t m, const Eigen::VectorXd& x) const;
  /// Growth rate above which a Jacobian eigenvalue counts as unstable.
  double growth_tol() const;
  /// Relative residual of the full right-hand side.
  double residual(const Eigen::VectorXd& x) const;

 private:
  struct Affine {
    Eigen::MatrixXd A;
    Eigen::VectorXd c;
  };
  EnsembleSet set_;
  int dim_ = 2;
  double alpha_scale_ = 1.0;
  std::vector<int> offset_, nvars_;
  std::vector<bool> frozen_;
  std::vector<double> gamma_phi_;
  // Member RHS is bilinear: f = (A0 + ar Ar + ai Ai) x + (c0 + ar cr + ai ci).
  std::vector<std::array<Affine, 3>> affine_;
  std::vector<std::size_t> solve_order_;

  Eigen::Matrix3cd to_rho(std::size_t m, const double* v) const;
  void from_rho(std::size_t m, const Eigen::Matrix3cd& r, double* v) const;
  // Both parts are linear in rho; the coupling part is also linear in alpha.
  Eigen::Matrix3cd static_part(std::size_t m, const Eigen::Matrix3cd& rho) const;
  Eigen::Matrix3cd coupling_part(std::size_t m, cd alpha, const Eigen::Matrix3cd& rho) const;
};

SteadyStateSolution solve_steady_state(const EnsembleSet& set, const SolveOptions& opts = {});
TimeTrace integrate(const EnsembleSet& set, const SystemState& initial, double t_final,
                    const IntegrateOptions& opts = {});
/// Dominant nonzero spectral line of a uniformly sampled real series (rad/s).
std::optional<double> dominant_frequency(const std::vector<double>& samples, double dt);

/// Regime rule shared by the solvers: OSCILLATION for an unstable fixed point or
/// self-sustaining gain, then PERFECT_EIT, EIT, MWI by Im(rho_1e).
Regime classify(const Eigen::VectorXcd& eigs, double growth_tol, double gain_ratio, cd rho_e1,
                cd reference_rho_e1, double tol_eit);

}  // namespace nvgyro
