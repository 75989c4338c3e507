#pragma once

// Run configuration read from YAML. Every physical key carries its unit in the
// name (kappa_hz, b_gauss, t_final_s); values are converted to the library's
// angular units on load.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "nvgyro/error.hpp"
#include "nvgyro/lambda_dynamics.hpp"
#include "nvgyro/multi_ensemble.hpp"
#include "nvgyro/nv_structure.hpp"
#include "nvgyro/sensing_metrics.hpp"

namespace nvgyro {

/// Invalid configuration; the message starts with "file:line:column:" when a position is known.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Inclusive grid; log spacing places points geometrically between start and stop.
struct GridSpec {
  double start = 0.0;
  double stop = 0.0;
  int points = 1;
  bool log = false;
  std::vector<double> values(double scale = 1.0) const;
};

struct RunConfig {
  NVParams nv;
  MagneticField field;

  // Lambda system. g_s follows from cooperativity and n_spins.
  LambdaParams lambda;
  double cooperativity = 20.0;
  double power_dbm = -55.0;
  double drive_frequency_hz = 2.87e9;

  NoiseModel noise;

  struct Spectrum {
    double omega_2_hz = 6e3;
    GridSpec probe_offset_hz{-2e3, 2e3, 2001, false};
  } spectrum;

  struct Sweep {
    GridSpec power_dbm{-100.0, -25.0, 100, false};
    GridSpec omega_2_hz{100.0, 1e5, 100, true};
    double lock_offset_hz = 80.0;
    double fd_step_hz = 3.2;
  } sweep;

  struct Coop {
    std::vector<double> cooperativity{1, 2, 3, 5, 7, 10, 14, 20, 28, 40, 56, 80};
    GridSpec power_dbm{-100.0, -20.0, 33, false};
    GridSpec omega_2_hz{100.0, 1e5, 49, true};
  } coop;

  struct Dynamics {
    double omega_2_hz = 6e3;
    double frame_offset_hz = 80.0;
    double t_final_s = 0.5;
    double sample_dt_s = 1e-4;
  } dynamics;

  struct Comag {
    double omega_2_hz = 3e3;
    double hyperfine_split_hz = 2.16e6;
    GridSpec delta_hz{-3e6, 3e6, 121, false};
    GridSpec delta_sc_hz{-6e6, 2e6, 81, false};
    GridSpec tone_hz{-8e6, 8e6, 161, false};
    double p2_dbm = -40.0;
    double omega_r_hz = 4.4e3;
    double delta_t_hz = -4.7e6;
  } comag;

  struct Vector {
    double omega_2_hz = 3e3;
    double spacing_hz = 0.8e6;
    std::array<double, 3> rotation_deg_s{0.3, -0.2, 0.5};
    double reading_noise_hz = 1e-6;
    int trials = 64;
    double field_drift_hz = 50.0;  // electron shift used in the comagnetometer demo
  } vector;

  struct Oracle {
    std::vector<int> n_spins{1, 2};
    int fock_cutoff = 8;
    double weak_drive = 0.01;  // J in units of kappa / 2
    std::vector<double> strong_drive{0.03, 0.1, 0.3, 1.0};
    int strong_cutoff = 25;
  } oracle;

  std::string out_dir = "out";
  int workers = 0;
  std::uint64_t seed = 1;

  /// Lambda parameters with g_s, J and the drive frequency applied.
  LambdaParams resolved_lambda() const;
  double omega_d() const { return kTwoPi * drive_frequency_hz; }
};

/// Parses YAML text. `source` names the input in error messages.
RunConfig parse_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_config(const std::string& path);

/// Built-in defaults rendered as YAML (the contents of configs/default.yaml).
std::string default_config_yaml();

}  // namespace nvgyro
