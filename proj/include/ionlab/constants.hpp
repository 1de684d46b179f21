#pragma once

// Physical constants (CODATA 2018, SI units) and project-wide defaults.

namespace ionlab {

inline constexpr double kPi = 3.14159265358979323846264338327950288;
inline constexpr double kTwoPi = 2.0 * kPi;

inline constexpr double kHbar = 1.054571817e-34;            // J s
inline constexpr double kBoltzmann = 1.380649e-23;          // J/K (exact)
inline constexpr double kAtomicMassUnit = 1.66053906660e-27;  // kg

// Default ion species: 171Yb+ on the S1/2 - P1/2 detection transition.
inline constexpr double kDefaultIonMassU = 170.936;
inline constexpr double kDefaultWavelength = 369.5e-9;      // m
inline constexpr double kDefaultLinewidthMHz = 19.6;        // ordinary frequency

}  // namespace ionlab
