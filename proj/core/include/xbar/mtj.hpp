#pragma once

namespace xbar {

struct MtjEval {
    double i = 0.0;  // A
    double g = 0.0;  // dI/dV
};

// I-V of an MTJ with zero-bias resistances R_P = r_p and
// R_AP = r_p * (1 + tmr). The TMR term rolls off with bias as
// tmr / (1 + (v / v_half)^2); v_half <= 0 disables the roll-off.
// `ap_fraction` in [0, 1] blends the two conductances, (1 - cos(theta)) / 2
// for a free layer at angle theta from the pinned layer.
MtjEval evaluate_mtj(double v, double r_p, double tmr, double v_half, double ap_fraction);

inline double mtj_effective_tmr(double v, double tmr, double v_half) {
    if (v_half <= 0.0) return tmr;
    const double x = v / v_half;
    return tmr / (1.0 + x * x);
}

}  // namespace xbar
