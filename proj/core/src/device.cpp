#include "xbar/device.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "xbar/errors.hpp"
#include "xbar/units.hpp"

namespace xbar {

std::string_view to_string(MtjState s) { return s == MtjState::P ? "P" : "AP"; }

std::string_view to_string(BitcellKind k) {
    switch (k) {
        case BitcellKind::OneT1MTJ: return "1T1MTJ";
        case BitcellKind::TwoT2MTJ: return "2T2MTJ";
        case BitcellKind::StrideI: return "STRIDe-I";
        case BitcellKind::StrideII: return "STRIDe-II";
    }
    return "?";
}

BitcellKind parse_kind(std::string_view name) {
    for (auto k : kAllKinds) {
        if (name == to_string(k)) return k;
    }
    if (name == "stride1" || name == "StrideI") return BitcellKind::StrideI;
    if (name == "stride2" || name == "StrideII") return BitcellKind::StrideII;
    if (name == "1t1mtj" || name == "OneT1MTJ") return BitcellKind::OneT1MTJ;
    if (name == "2t2mtj" || name == "TwoT2MTJ") return BitcellKind::TwoT2MTJ;
    throw ParameterError("unknown bitcell kind '" + std::string(name) + "'");
}

void DeviceParams::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw ParameterError(std::string("device parameter '") + name + "' must be positive");
        }
    };
    positive(fl_width_nm, "fl_width_nm");
    positive(fl_length_nm, "fl_length_nm");
    positive(fl_thickness_nm, "fl_thickness_nm");
    positive(tox_nm, "tox_nm");
    positive(ms_emu_cc, "ms_emu_cc");
    positive(ku_erg_cc, "ku_erg_cc");
    positive(energy_barrier_kt, "energy_barrier_kt");
    positive(damping, "damping");
    positive(gyro_mhz_per_oe, "gyro_mhz_per_oe");
    positive(spin_polarization, "spin_polarization");
    positive(temperature_k, "temperature_k");
    positive(r_p_ohm, "r_p_ohm");
    positive(tmr, "tmr");
    positive(vth, "vth");
    positive(beta, "beta");
    positive(access_beta_ratio, "access_beta_ratio");
    positive(write_beta_ratio, "write_beta_ratio");
    positive(common_access_beta_ratio, "common_access_beta_ratio");
    positive(swing_mv_dec, "swing_mv_dec");
    positive(vdd, "vdd");
    if (!(tmr_half_bias_v >= 0.0)) {
        throw ParameterError("device parameter 'tmr_half_bias_v' must be >= 0");
    }
    if (!(dibl >= 0.0)) throw ParameterError("device parameter 'dibl' must be >= 0");
    if (!(leakage_floor >= 0.0)) {
        throw ParameterError("device parameter 'leakage_floor' must be >= 0");
    }
    if (!(vth < vdd)) throw ParameterError("device parameter 'vth' must be below vdd");
    const double n = swing_mv_dec * 1e-3 / (thermal_voltage() * std::numbers::ln10);
    if (!(n > 1.0)) {
        throw ParameterError("device parameter 'swing_mv_dec' is below the thermal limit");
    }
}

double DeviceParams::thermal_voltage() const {
    return units::kBoltzmann * temperature_k / units::kElementaryCharge;
}

FetModel DeviceParams::fet(double beta_ratio, double vth_shift) const {
    FetModel m;
    m.thermal_voltage = thermal_voltage();
    m.slope_factor = swing_mv_dec * 1e-3 / (m.thermal_voltage * std::numbers::ln10);
    m.vth = vth + vth_shift;
    m.beta = beta * beta_ratio;
    m.dibl = dibl;
    m.leakage_floor = leakage_floor * beta_ratio;
    return m;
}

double mtj_resistance(MtjState state, const DeviceParams& params) {
    if (!(params.r_p_ohm > 0.0) || !(params.tmr > 0.0)) {
        throw ParameterError("mtj_resistance requires r_p_ohm > 0 and tmr > 0");
    }
    return state == MtjState::P ? params.r_p_ohm : params.r_p_ohm * (1.0 + params.tmr);
}

void TerminalVoltages::validate(double vdd) const {
    for (double v : {v_bl, v_blb, v_sl, v_slb, v_wl, v_wwl}) {
        if (!std::isfinite(v) || v < 0.0 || v > 2.0 * vdd) {
            throw ParameterError("terminal voltage outside [0, 2*VDD]");
        }
    }
}

void validate_weight(BitcellKind kind, CellWeight weight) {
    if (is_two_mtj(kind) && weight.left == weight.right) {
        throw ParameterError("two-MTJ bitcells require complementary MTJ states");
    }
}

CellStamp stamp_bitcell(Circuit& c, BitcellKind kind, CellWeight weight, const CellTerminals& t,
                        const DeviceParams& p, const CellVariation& var) {
    CellStamp st;
    auto mtj = [&](Circuit::NodeId a, Circuit::NodeId b, MtjState s, int side) {
        return static_cast<int>(c.add_mtj(a, b,
                                          p.r_p_ohm * var.r_p_scale[static_cast<std::size_t>(side)],
                                          p.tmr, p.tmr_half_bias_v, s == MtjState::AP ? 1.0 : 0.0));
    };
    const auto& dv = var.vth_shift;

    switch (kind) {
        case BitcellKind::OneT1MTJ: {
            auto n = c.add_node();
            st.internal = {n};
            st.mtj_resistor[0] = mtj(t.bl, n, weight.left, 0);
            st.sink_fet[0] = static_cast<int>(c.add_fet(n, t.wl, t.sl, p.fet(p.access_beta_ratio, dv[0])));
            break;
        }
        case BitcellKind::TwoT2MTJ: {
            auto n1 = c.add_node();
            auto n2 = c.add_node();
            st.internal = {n1, n2};
            st.mtj_resistor[0] = mtj(t.bl, n1, weight.left, 0);
            st.mtj_resistor[1] = mtj(t.blb, n2, weight.right, 1);
            st.sink_fet[0] = static_cast<int>(c.add_fet(n1, t.wl, t.sl, p.fet(p.access_beta_ratio, dv[0])));
            st.sink_fet[1] = static_cast<int>(c.add_fet(n2, t.wl, t.slb, p.fet(p.access_beta_ratio, dv[1])));
            break;
        }
        case BitcellKind::StrideI: {
            // M1: n1 -> common source, gate n2; M2: n2 -> common, gate n1;
            // M3: common -> SL, gate WL; M4: n1 <-> n2, gate WWL (write path).
            auto n1 = c.add_node();
            auto n2 = c.add_node();
            auto cs = c.add_node();
            st.internal = {n1, n2, cs};
            st.mtj_resistor[0] = mtj(t.bl, n1, weight.left, 0);
            st.mtj_resistor[1] = mtj(t.blb, n2, weight.right, 1);
            c.add_fet(n1, n2, cs, p.fet(1.0, dv[0]));
            c.add_fet(n2, n1, cs, p.fet(1.0, dv[1]));
            st.sink_fet[0] = static_cast<int>(
                c.add_fet(cs, t.wl, t.sl, p.fet(p.common_access_beta_ratio, dv[2])));
            c.add_fet(n1, t.wwl, n2, p.fet(p.write_beta_ratio, dv[3]));
            break;
        }
        case BitcellKind::StrideII: {
            // M1: n1 -> x1, gate n2; M3: x1 -> SL, gate WL
            // M2: n2 -> x2, gate n1; M4: x2 -> SLB, gate WL
            auto n1 = c.add_node();
            auto n2 = c.add_node();
            auto x1 = c.add_node();
            auto x2 = c.add_node();
            st.internal = {n1, n2, x1, x2};
            st.mtj_resistor[0] = mtj(t.bl, n1, weight.left, 0);
            st.mtj_resistor[1] = mtj(t.blb, n2, weight.right, 1);
            c.add_fet(n1, n2, x1, p.fet(1.0, dv[0]));
            c.add_fet(n2, n1, x2, p.fet(1.0, dv[1]));
            st.sink_fet[0] = static_cast<int>(c.add_fet(x1, t.wl, t.sl, p.fet(p.access_beta_ratio, dv[2])));
            st.sink_fet[1] = static_cast<int>(c.add_fet(x2, t.wl, t.slb, p.fet(p.access_beta_ratio, dv[3])));
            break;
        }
    }
    return st;
}

namespace {

struct CellCircuit {
    Circuit c;
    CellTerminals t;
    CellStamp st;
};

CellCircuit build_cell(BitcellKind kind, CellWeight weight, const TerminalVoltages& tv,
                       const DeviceParams& params, const CellVariation& var) {
    CellCircuit cc;
    auto& c = cc.c;
    cc.t = {c.add_fixed(tv.v_bl), c.add_fixed(tv.v_blb), c.add_fixed(tv.v_sl),
            c.add_fixed(tv.v_slb), c.add_fixed(tv.v_wl), c.add_fixed(tv.v_wwl)};
    cc.st = stamp_bitcell(c, kind, weight, cc.t, params, var);
    return cc;
}

BranchCurrents extract(const CellCircuit& cc, const Circuit::Solution& sol,
                       std::vector<double>* internal_out) {
    const auto& c = cc.c;
    const auto& st = cc.st;
    const auto& v = sol.voltages;
    BranchCurrents out;
    out.max_residual = sol.max_residual;
    out.i_left = c.mtj_current(static_cast<std::size_t>(st.mtj_resistor[0]), v);
    if (st.mtj_resistor[1] >= 0) {
        out.i_right = c.mtj_current(static_cast<std::size_t>(st.mtj_resistor[1]), v);
    }
    out.v_n1 = v[static_cast<std::size_t>(st.internal[0])];
    if (st.internal.size() > 1) out.v_n2 = v[static_cast<std::size_t>(st.internal[1])];
    if (st.sink_fet[0] >= 0) out.i_sl = c.fet_current(static_cast<std::size_t>(st.sink_fet[0]), v);
    if (st.sink_fet[1] >= 0) out.i_slb = c.fet_current(static_cast<std::size_t>(st.sink_fet[1]), v);
    if (internal_out != nullptr) {
        internal_out->clear();
        for (auto n : st.internal) internal_out->push_back(v[static_cast<std::size_t>(n)]);
    }
    return out;
}

}  // namespace

BranchCurrents solve_bitcell_dc(BitcellKind kind, CellWeight weight, const TerminalVoltages& tv,
                                const DeviceParams& params, const CellVariation& var,
                                std::vector<double>* internal_out) {
    validate_weight(kind, weight);
    tv.validate(params.vdd);

    CellCircuit cc = build_cell(kind, weight, tv, params, var);
    if (!is_stride(kind)) return extract(cc, cc.c.solve(), internal_out);

    // The latch is bistable. Its state is decided while the discharged
    // internal nodes charge through the two MTJs after the bitlines step to
    // V_READ, so follow that transient before the final DC solve.
    std::vector<double> v(cc.c.node_count(), 0.0);
    Circuit::Options opt;
    using T = LatchTransient;
    double dt = T::first_step;
    for (double t = 0.0; t < T::max_time; t += dt, dt *= T::step_growth) {
        auto next = cc.c.transient_step(v, T::node_cap / dt, opt);
        double change = 0.0;
        for (auto n : cc.st.internal) {
            const auto k = static_cast<std::size_t>(n);
            change = std::max(change, std::abs(next.voltages[k] - v[k]));
        }
        v = std::move(next.voltages);
        if (change < T::settled_v) break;
    }
    for (auto n : cc.st.internal) cc.c.set_guess(n, v[static_cast<std::size_t>(n)]);
    Circuit::Solution sol = cc.c.solve();
    return extract(cc, sol, internal_out);
}

BranchCurrents solve_bitcell_dc_warm(BitcellKind kind, CellWeight weight,
                                     const TerminalVoltages& tv, const DeviceParams& params,
                                     const CellVariation& var, std::span<const double> guess,
                                     std::vector<double>& internal_out) {
    validate_weight(kind, weight);
    tv.validate(params.vdd);
    CellCircuit cc = build_cell(kind, weight, tv, params, var);
    if (guess.size() != cc.st.internal.size()) {
        throw ParameterError("warm-start guess size does not match the bitcell");
    }
    for (std::size_t i = 0; i < guess.size(); ++i) cc.c.set_guess(cc.st.internal[i], guess[i]);
    return extract(cc, cc.c.solve(), &internal_out);
}

SweepPoint read_currents(BitcellKind kind, const DeviceParams& params, double v_read) {
    const auto tv = TerminalVoltages::read(v_read, params.vdd);
    SweepPoint pt{v_read, 0.0, 0.0, 0.0};
    switch (kind) {
        case BitcellKind::OneT1MTJ: {
            pt.i_high = solve_bitcell_dc(kind, CellWeight::single(MtjState::P), tv, params).i_left;
            pt.i_low = solve_bitcell_dc(kind, CellWeight::single(MtjState::AP), tv, params).i_left;
            break;
        }
        case BitcellKind::TwoT2MTJ: {
            auto bc = solve_bitcell_dc(kind, CellWeight::pap(), tv, params);
            pt.i_high = bc.i_left;   // P branch
            pt.i_low = bc.i_right;   // AP branch
            break;
        }
        case BitcellKind::StrideI:
        case BitcellKind::StrideII: {
            auto bc = solve_bitcell_dc(kind, CellWeight::app(), tv, params);
            pt.i_high = bc.i_left;   // AP branch, cross-coupled ON
            pt.i_low = bc.i_right;   // P branch, OFF
            break;
        }
    }
    pt.ratio = pt.i_low > 0.0 ? pt.i_high / pt.i_low : std::numeric_limits<double>::infinity();
    return pt;
}

SweepResult sweep_vread(BitcellKind kind, const DeviceParams& params, double v_lo, double v_hi,
                        std::size_t steps) {
    params.validate();
    if (steps < 2 || !(v_lo >= 0.0) || !(v_hi <= params.vdd) || !(v_lo < v_hi)) {
        throw ParameterError("sweep range must satisfy 0 <= v_lo < v_hi <= VDD with >= 2 steps");
    }
    SweepResult r;
    r.points.reserve(steps);
    for (std::size_t i = 0; i < steps; ++i) {
        const double v = v_lo + (v_hi - v_lo) * static_cast<double>(i) / static_cast<double>(steps - 1);
        r.points.push_back(read_currents(kind, params, v));
        if (r.points.back().ratio > r.points[r.argmax].ratio) r.argmax = i;
    }
    return r;
}

double vread_for_current(BitcellKind kind, const DeviceParams& params, double target,
                         double v_lo, double v_hi) {
    double lo = v_lo;
    double hi = v_hi;
    if (read_currents(kind, params, hi).i_high < target) {
        throw ParameterError("target current not reachable below v_hi");
    }
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (read_currents(kind, params, mid).i_high < target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace xbar

namespace xbar {

std::span<const DeviceParamField> device_param_fields() {
#define XBAR_F(n) DeviceParamField{#n, &DeviceParams::n}
    static const DeviceParamField fields[] = {
        XBAR_F(fl_width_nm), XBAR_F(fl_length_nm), XBAR_F(fl_thickness_nm),
        XBAR_F(tox_nm), XBAR_F(ms_emu_cc), XBAR_F(ku_erg_cc),
        XBAR_F(energy_barrier_kt), XBAR_F(damping), XBAR_F(gyro_mhz_per_oe),
        XBAR_F(spin_polarization), XBAR_F(temperature_k), XBAR_F(r_p_ohm),
        XBAR_F(tmr), XBAR_F(tmr_half_bias_v), XBAR_F(vth), XBAR_F(beta),
        XBAR_F(access_beta_ratio), XBAR_F(write_beta_ratio),
        XBAR_F(common_access_beta_ratio), XBAR_F(swing_mv_dec), XBAR_F(dibl),
        XBAR_F(leakage_floor), XBAR_F(vdd),
    };
#undef XBAR_F
    return fields;
}

}  // namespace xbar
