#pragma once

#include <cmath>
#include <numbers>

namespace nvgyro {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// CODATA 2018 exact values.
inline constexpr double kHbar = 1.054571817e-34;    // J s
inline constexpr double kBoltzmann = 1.380649e-23;  // J/K

inline constexpr double hz_to_rad(double hz) { return kTwoPi * hz; }
inline constexpr double rad_to_hz(double rad_s) { return rad_s / kTwoPi; }

inline double dbm_to_watt(double p_dbm) { return 1e-3 * std::pow(10.0, p_dbm / 10.0); }

inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

}  // namespace nvgyro
