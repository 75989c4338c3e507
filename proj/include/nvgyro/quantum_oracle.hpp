#pragma once

// Exact Lindblad steady state for a truncated cavity and a few three-level
// spins, used to check the mean-field closure.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <string>

#include "nvgyro/lambda_dynamics.hpp"

namespace nvgyro {

struct OracleConfig {
  // Rates as for the mean-field model; params.N is replaced by n_spins and the
  // single-spin coupling is g_s sqrt(N / n_spins), keeping g sqrt(N) fixed.
  LambdaParams params;
  int n_spins = 1;
  int fock_cutoff = 10;  // Fock states 0 .. cutoff-1
  void validate() const;
  /// 2 when nothing connects |0,0> to the other levels (it then stays empty), else 3.
  int spin_levels() const;
  int hilbert_dim() const;
  double coupling() const;
};

using SparseC = Eigen::SparseMatrix<cd>;

/// Superoperator on column-stacked density matrices, basis |n> (x) spin_1 (x) ...
SparseC build_liouvillian(const OracleConfig& cfg);

struct OracleState {
  Eigen::MatrixXcd rho;
  cd a{0.0, 0.0};
  double photons = 0.0;
  double top_fock_population = 0.0;
  double min_eigenvalue = 0.0;
  bool cutoff_adequate = false;  // top Fock population below 1e-6
};

OracleState steady_state_exact(const OracleConfig& cfg);

/// Mean-field amplitude with N = n_spins and the oracle coupling.
cd mean_field_alpha(const OracleConfig& cfg);

struct OracleComparison {
  OracleConfig config;
  cd a_exact{0.0, 0.0};
  cd a_meanfield{0.0, 0.0};
  double rel_err = 0.0;
  double cutoff_shift = 0.0;  // |<a>| change with 5 more Fock states
  double top_fock_population = 0.0;
};

OracleComparison compare_with_mean_field(const OracleConfig& cfg, bool check_cutoff = true);

}  // namespace nvgyro
