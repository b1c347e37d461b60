#pragma once

#include <numbers>

namespace mgtrap::constants {

inline constexpr double gravity = 9.80665;                           // m/s^2
inline constexpr double mu0 = 4.0e-7 * std::numbers::pi;            // T m / A
inline constexpr double boltzmann = 1.380649e-23;                    // J/K
inline constexpr double hbar = 1.054572e-34;                         // J s
inline constexpr double elementary_charge = 1.602177e-19;            // C
inline constexpr double torr = 101325.0 / 760.0;                     // Pa
inline constexpr double two_pi = 2.0 * std::numbers::pi;

}  // namespace mgtrap::constants
