#pragma once

namespace xbar::units {

inline constexpr double kBoltzmann = 1.380649e-23;        // J/K
inline constexpr double kElementaryCharge = 1.602176634e-19;  // C
inline constexpr double kHbar = 1.054571817e-34;          // J s
inline constexpr double kBoltzmannErg = 1.380649e-16;     // erg/K

inline constexpr double kMicro = 1e-6;
inline constexpr double kNano = 1e-9;

}  // namespace xbar::units
