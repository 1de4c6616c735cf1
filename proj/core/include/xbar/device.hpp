#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xbar/circuit.hpp"
#include "xbar/fet.hpp"

namespace xbar {

enum class MtjState { P, AP };

constexpr MtjState complement(MtjState s) noexcept {
    return s == MtjState::P ? MtjState::AP : MtjState::P;
}

std::string_view to_string(MtjState s);

// MTJ and transistor parameters. Free-layer and switching quantities follow
// the 45 nm PMA device card; R_P and the transistor constants are
// calibration values for the compact models used here.
struct DeviceParams {
    // free layer (elliptical disc, width x length)
    double fl_width_nm = 60.0;
    double fl_length_nm = 60.0;
    double fl_thickness_nm = 1.0;
    double tox_nm = 1.3;
    double ms_emu_cc = 865.0;
    double ku_erg_cc = 9.66e5;
    double energy_barrier_kt = 64.0;
    double damping = 0.008;
    double gyro_mhz_per_oe = 17.6;
    double spin_polarization = 0.1748;
    double temperature_k = 298.15;

    // MTJ resistance; tmr is the zero-bias value, rolling off with bias
    // as tmr / (1 + (V / tmr_half_bias_v)^2). tmr_half_bias_v = 0 disables it.
    double r_p_ohm = 4670.0;
    double tmr = 4.48;  // fraction: (R_AP - R_P) / R_P
    double tmr_half_bias_v = 0.70;

    // transistor
    double vth = 0.30;
    double beta = 1.79e-3;           // A/V^2 of the cross-coupled (unit) device
    double access_beta_ratio = 6.5;  // access (WL-gated) devices relative to unit
    double write_beta_ratio = 25.0;   // STRIDe-I write device relative to unit
    double common_access_beta_ratio = 0.10;  // STRIDe-I shared read access device
    double swing_mv_dec = 70.0;
    double dibl = 0.10;
    double leakage_floor = 1e-11;    // A
    double vdd = 1.2;

    // Throws ParameterError naming the first violated constraint.
    void validate() const;

    double thermal_voltage() const;
    FetModel fet(double beta_ratio = 1.0, double vth_shift = 0.0) const;
};

double mtj_resistance(MtjState state, const DeviceParams& params);

enum class BitcellKind { OneT1MTJ, TwoT2MTJ, StrideI, StrideII };

inline constexpr std::array<BitcellKind, 4> kAllKinds = {
    BitcellKind::OneT1MTJ, BitcellKind::TwoT2MTJ, BitcellKind::StrideI, BitcellKind::StrideII};

std::string_view to_string(BitcellKind k);
BitcellKind parse_kind(std::string_view name);
constexpr bool is_two_mtj(BitcellKind k) noexcept { return k != BitcellKind::OneT1MTJ; }
constexpr bool is_stride(BitcellKind k) noexcept {
    return k == BitcellKind::StrideI || k == BitcellKind::StrideII;
}

// Stored MTJ state(s). For two-MTJ kinds left/right must be complementary;
// OneT1MTJ uses `left` only.
struct CellWeight {
    MtjState left = MtjState::P;
    MtjState right = MtjState::AP;

    static CellWeight pap() { return {MtjState::P, MtjState::AP}; }
    static CellWeight app() { return {MtjState::AP, MtjState::P}; }
    static CellWeight single(MtjState s) { return {s, complement(s)}; }
    bool operator==(const CellWeight&) const = default;
};

struct TerminalVoltages {
    double v_bl = 0.0;
    double v_blb = 0.0;
    double v_sl = 0.0;
    double v_slb = 0.0;
    double v_wl = 0.0;
    double v_wwl = 0.0;

    void validate(double vdd) const;
    static TerminalVoltages read(double v_read, double v_wl) {
        TerminalVoltages t;
        t.v_bl = v_read;
        t.v_blb = v_read;
        t.v_wl = v_wl;
        return t;
    }
};

struct BranchCurrents {
    double i_left = 0.0;   // BL into the cell through MTJ_L
    double i_right = 0.0;  // BLB into the cell through MTJ_R
    double v_n1 = 0.0;
    double v_n2 = 0.0;
    double i_sl = 0.0;     // out of the cell into SL
    double i_slb = 0.0;    // out of the cell into SLB
    double max_residual = 0.0;
};

// Per-instance device deviations (process variation) applied on top of
// DeviceParams: multiplicative R_P scale per MTJ and additive V_th shift
// per transistor (M1..M4; single-transistor kinds use index 0/1 only).
struct CellVariation {
    std::array<double, 2> r_p_scale{1.0, 1.0};
    std::array<double, 4> vth_shift{0.0, 0.0, 0.0, 0.0};
};

// Read-resolution transient for the STRIDe latch: backward Euler with C at
// every unknown node, geometric step growth, stop once the nodes settle.
struct LatchTransient {
    static constexpr double node_cap = 1e-15;
    static constexpr double first_step = 0.2e-12;
    static constexpr double step_growth = 1.25;
    static constexpr double max_time = 5e-9;
    static constexpr double settled_v = 1e-6;
};

// DC operating point of one bitcell. Internal nodes start discharged (0 V);
// for STRIDe kinds the bitlines step to the requested level and the
// resolution transient runs before the DC polish.
// Throws ConvergenceError carrying the last residual on failure.
BranchCurrents solve_bitcell_dc(BitcellKind kind, CellWeight weight, const TerminalVoltages& tv,
                                const DeviceParams& params, const CellVariation& var = {},
                                std::vector<double>* internal_out = nullptr);

// Same, starting Newton from a given internal-node guess (continuation along
// a sweep). `internal_out` receives the converged internal voltages.
BranchCurrents solve_bitcell_dc_warm(BitcellKind kind, CellWeight weight,
                                     const TerminalVoltages& tv, const DeviceParams& params,
                                     const CellVariation& var, std::span<const double> guess,
                                     std::vector<double>& internal_out);

void validate_weight(BitcellKind kind, CellWeight weight);

// Adds one bitcell between the given line nodes. Returns the internal
// unknown node ids (n1, n2, ...) and the MTJ element indices (left, right)
// so callers can read branch currents from a solution. Used by both the
// single-cell solve and the full-array nodal oracle.
struct CellStamp {
    std::vector<Circuit::NodeId> internal;
    std::array<int, 2> mtj_resistor{-1, -1};
    // FETs whose current flows into SL / SLB (drain->source positive)
    std::array<int, 2> sink_fet{-1, -1};
};

struct CellTerminals {
    Circuit::NodeId bl, blb, sl, slb, wl, wwl;
};

CellStamp stamp_bitcell(Circuit& c, BitcellKind kind, CellWeight weight, const CellTerminals& t,
                        const DeviceParams& params, const CellVariation& var = {});

struct SweepPoint {
    double v_read;
    double i_high;  // sensed HIGH-state current (AP branch for STRIDe, P for baselines)
    double i_low;
    double ratio;
};

struct SweepResult {
    std::vector<SweepPoint> points;
    std::size_t argmax = 0;
    bool interior_maximum() const {
        return !points.empty() && argmax > 0 && argmax + 1 < points.size();
    }
};

// Sweeps V_READ (WL = V_DD) and reports the high/low sensed currents for
// the cell's two weight states.
SweepResult sweep_vread(BitcellKind kind, const DeviceParams& params, double v_lo, double v_hi,
                        std::size_t steps);

// High/low sensed bitcell currents at a single read voltage.
SweepPoint read_currents(BitcellKind kind, const DeviceParams& params, double v_read);

// Smallest V_READ in [v_lo, v_hi] giving i_high == target (bisection).
double vread_for_current(BitcellKind kind, const DeviceParams& params, double target,
                         double v_lo = 0.05, double v_hi = 1.0);

}  // namespace xbar

namespace xbar {

// Name/member table for every DeviceParams field (all are doubles), in
// declaration order. Used for serialization and configuration.
struct DeviceParamField {
    const char* name;
    double DeviceParams::* member;
};
std::span<const DeviceParamField> device_param_fields();

}  // namespace xbar
