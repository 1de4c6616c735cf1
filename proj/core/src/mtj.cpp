#include "xbar/mtj.hpp"

namespace xbar {

MtjEval evaluate_mtj(double v, double r_p, double tmr, double v_half, double ap_fraction) {
    const double g_p = (1.0 - ap_fraction) / r_p;
    if (ap_fraction == 0.0) return {v * g_p, g_p};
    if (v_half <= 0.0) {
        const double g = g_p + ap_fraction / (r_p * (1.0 + tmr));
        return {v * g, g};
    }
    const double x = v / v_half;
    const double d = 1.0 + x * x;
    const double r = r_p * (1.0 + tmr / d);
    // dR/dV = -r_p * tmr * 2x / (v_half * d^2)
    const double dr = -r_p * tmr * 2.0 * x / (v_half * d * d);
    const double i_ap = ap_fraction * v / r;
    const double g_ap = ap_fraction * (1.0 / r - v * dr / (r * r));
    return {v * g_p + i_ap, g_p + g_ap};
}

}  // namespace xbar
