#pragma once

#include <numbers>

namespace shuttle::constants {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline constexpr double kElementaryCharge = 1.602176634e-19;  // C
inline constexpr double kAtomicMassUnit = 1.66053906660e-27;   // kg
inline constexpr double kCalcium40MassU = 39.9625909;

inline constexpr double kMicron = 1e-6;

}  // namespace shuttle::constants
