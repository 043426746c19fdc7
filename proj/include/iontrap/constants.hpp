#pragma once

namespace iontrap::constants {

// CODATA 2018
inline constexpr double kElementaryCharge = 1.602176634e-19;    // C
inline constexpr double kVacuumPermittivity = 8.8541878128e-12; // F/m
inline constexpr double kCoulomb = 8.9875517923e9;              // 1/(4 pi eps0), N m^2/C^2
inline constexpr double kBoltzmann = 1.380649e-23;              // J/K
inline constexpr double kHbar = 1.054571817e-34;                // J s
inline constexpr double kAtomicMassUnit = 1.66053906660e-27;    // kg
inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double kMassCa40Amu = 39.962590863;
inline constexpr double kMassBe9Amu = 9.012183065;
inline constexpr double kMassH2Amu = 2.01588;

} // namespace iontrap::constants
