#include "xbar/fet.hpp"

#include <cmath>

namespace xbar {
namespace {

// F(x) = ln^2(1 + e^{x/2}) and its derivative.
struct Interp {
    double f;
    double df;
};

Interp interp(double x) {
    const double h = 0.5 * x;
    double sp;     // softplus(h)
    double sig;    // logistic(h)
    if (h > 40.0) {
        sp = h;
        sig = 1.0;
    } else if (h < -40.0) {
        sp = std::exp(h);
        sig = sp;
    } else {
        sp = std::log1p(std::exp(h));
        sig = 1.0 / (1.0 + std::exp(-h));
    }
    return {sp * sp, sp * sig};
}

FetEval forward(const FetModel& m, double v_gs, double v_ds) {
    const double nut = m.slope_factor * m.thermal_voltage;
    const double vth_eff = m.vth - m.dibl * v_ds;
    const double xf = (v_gs - vth_eff) / nut;
    const double xr = (v_gs - vth_eff - m.slope_factor * v_ds) / nut;
    const Interp a = interp(xf);
    const Interp b = interp(xr);
    const double is = m.specific_current();

    FetEval e;
    e.id = is * (a.f - b.f);
    e.g_gs = is * (a.df - b.df) / nut;
    e.g_ds = is * (a.df * m.dibl - b.df * (m.dibl - m.slope_factor)) / nut;

    if (m.leakage_floor > 0.0) {
        const double ex = std::exp(-v_ds / m.thermal_voltage);
        e.id += m.leakage_floor * (1.0 - ex);
        e.g_ds += m.leakage_floor * ex / m.thermal_voltage;
    }
    return e;
}

}  // namespace

FetEval evaluate_fet(const FetModel& m, double v_gs, double v_ds) {
    if (v_ds >= 0.0) {
        return forward(m, v_gs, v_ds);
    }
    // Source and drain exchange roles: id(vgs, vds) = -f(vgs - vds, -vds).
    const FetEval r = forward(m, v_gs - v_ds, -v_ds);
    FetEval e;
    e.id = -r.id;
    e.g_gs = -r.g_gs;
    e.g_ds = r.g_gs + r.g_ds;
    return e;
}

}  // namespace xbar
