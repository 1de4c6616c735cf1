#pragma once

namespace xbar {

// Compact NMOS model. Source-referenced EKV interpolation: square law with
// channel saturation above threshold, exponential conduction below it,
// linear DIBL threshold lowering, plus a hard off-state leakage floor.
// Negative v_ds is handled by swapping drain and source.
struct FetModel {
    double vth = 0.45;            // V
    double beta = 1e-3;           // A/V^2 (mu*Cox*W/L)
    double slope_factor = 1.5;    // n, from subthreshold swing
    double thermal_voltage = 0.0257;
    double dibl = 0.0;            // V/V
    double leakage_floor = 0.0;   // A

    double specific_current() const {
        return 2.0 * slope_factor * beta * thermal_voltage * thermal_voltage;
    }
};

struct FetEval {
    double id = 0.0;    // drain -> source current
    double g_gs = 0.0;  // d id / d v_gs
    double g_ds = 0.0;  // d id / d v_ds
};

FetEval evaluate_fet(const FetModel& m, double v_gs, double v_ds);

inline double fet_drain_current(const FetModel& m, double v_gs, double v_ds) {
    return evaluate_fet(m, v_gs, v_ds).id;
}

}  // namespace xbar
