#pragma once

#include <numbers>

namespace tack::constants {

inline constexpr double pi = std::numbers::pi;
inline constexpr double elementary_charge = 1.602176634e-19;   // C
inline constexpr double atomic_mass_unit = 1.66053906660e-27;  // kg
inline constexpr double coulomb_constant = 8.9875517923e9;     // N m^2 / C^2
inline constexpr double electron_volt = elementary_charge;     // J

inline constexpr double mm = 1e-3;
inline constexpr double um = 1e-6;
inline constexpr double nm = 1e-9;
inline constexpr double deg = pi / 180.0;

} // namespace tack::constants
