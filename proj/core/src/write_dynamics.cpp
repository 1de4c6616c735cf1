#include "xbar/write_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include "xbar/circuit.hpp"
#include "xbar/errors.hpp"
#include "xbar/units.hpp"

namespace xbar {
namespace {

Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

Vec3 axpy(const Vec3& x, double a, const Vec3& y) {
    return {x[0] + a * y[0], x[1] + a * y[1], x[2] + a * y[2]};
}

double norm(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

// spin-torque prefactor hbar / (2 e Ms V) converted to Oe per ampere
double aj_per_amp(const DeviceParams& p) {
    const double msv = p.ms_emu_cc * free_layer_volume_cm3(p);  // emu
    // hbar * I / e is in joules; 1 J / emu = 1e7 Oe
    return 1e7 * units::kHbar * p.spin_polarization / (2.0 * units::kElementaryCharge * msv);
}

}  // namespace

double free_layer_volume_cm3(const DeviceParams& p) {
    // elliptical disc; the card's 60 x 60 nm is a circle
    const double area_nm2 = std::numbers::pi / 4.0 * p.fl_width_nm * p.fl_length_nm;
    return area_nm2 * p.fl_thickness_nm * 1e-21;
}

double anisotropy_field_oe(const DeviceParams& p) { return 2.0 * p.ku_erg_cc / p.ms_emu_cc; }

double computed_energy_barrier_kt(const DeviceParams& p) {
    return p.ku_erg_cc * free_layer_volume_cm3(p) / (units::kBoltzmannErg * p.temperature_k);
}

double critical_current(const DeviceParams& p) {
    // a_J(I_c) = alpha * H_k
    return p.damping * anisotropy_field_oe(p) / aj_per_amp(p);
}

double polarization_for_critical_current(const DeviceParams& p, double i_c) {
    if (!(i_c > 0.0)) throw ParameterError("critical current must be positive");
    return p.spin_polarization * critical_current(p) / i_c;
}

Macrospin::Macrospin(const DeviceParams& p, MtjState initial, double tilt_deg)
    : gamma_(p.gyro_mhz_per_oe * 1e6 * 1e-9 / (1.0 + p.damping * p.damping)),
      alpha_(p.damping),
      hk_(anisotropy_field_oe(p)),
      aj_per_amp_(aj_per_amp(p)),
      sign0_(initial == MtjState::P ? 1.0 : -1.0) {
    const double th = tilt_deg * std::numbers::pi / 180.0;
    m_ = {std::sin(th), 0.0, sign0_ * std::cos(th)};
}

double Macrospin::ap_fraction() const { return std::clamp(0.5 * (1.0 - m_[2]), 0.0, 1.0); }

Vec3 Macrospin::rhs(const Vec3& m, double a_j) const {
    // LL form: -g m x H - g alpha m x (m x H) + g a_J m x (m x p) - g alpha a_J m x p
    const Vec3 h{0.0, 0.0, hk_ * m[2]};
    const Vec3 p{0.0, 0.0, 1.0};
    const Vec3 mxh = cross(m, h);
    const Vec3 mxmxh = cross(m, mxh);
    const Vec3 mxp = cross(m, p);
    const Vec3 mxmxp = cross(m, mxp);
    Vec3 out{};
    for (int i = 0; i < 3; ++i) {
        out[i] = gamma_ * (-mxh[i] - alpha_ * mxmxh[i] + a_j * mxmxp[i] - alpha_ * a_j * mxp[i]);
    }
    return out;
}

void Macrospin::step(double current, double dt) {
    const double a_j = aj_per_amp_ * current;
    const Vec3 k1 = rhs(m_, a_j);
    const Vec3 k2 = rhs(axpy(m_, 0.5 * dt, k1), a_j);
    const Vec3 k3 = rhs(axpy(m_, 0.5 * dt, k2), a_j);
    const Vec3 k4 = rhs(axpy(m_, dt, k3), a_j);
    Vec3 next{};
    for (int i = 0; i < 3; ++i) {
        next[i] = m_[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    const double n = norm(next);
    if (!std::isfinite(n)) throw ConvergenceError("non-finite magnetization in LLGS step", 0.0);
    drift_ = n - 1.0;
    for (auto& c : next) c /= n;
    m_ = next;
}

WriteResult llgs_simulate(const DeviceParams& p, double current, MtjState initial,
                          const LlgsOptions& opt) {
    if (!(opt.dt_ns > 0.0) || opt.dt_ns > 1e-3 + 1e-15) {
        throw ParameterError("LLGS time step must be in (0, 1 ps]");
    }
    if (!(opt.horizon_ns > 0.0)) throw ParameterError("LLGS horizon must be positive");
    Macrospin spin(p, initial, opt.tilt_deg);
    WriteResult r;
    const auto steps = static_cast<long>(std::ceil(opt.horizon_ns / opt.dt_ns));
    if (opt.record_every > 0) r.trajectory.push_back({0.0, spin.m()});
    for (long k = 1; k <= steps; ++k) {
        try {
            spin.step(current, opt.dt_ns);
        } catch (const ConvergenceError&) {
            throw ConvergenceError("LLGS integration failed at step " + std::to_string(k), 0.0);
        }
        const double t = static_cast<double>(k) * opt.dt_ns;
        if (opt.record_every > 0 && k % opt.record_every == 0) r.trajectory.push_back({t, spin.m()});
        if (!r.switched && spin.m()[2] * spin.initial_sign() < -opt.switch_threshold) {
            r.switched = true;
            r.latency_ns = t;
            if (opt.record_every == 0) break;
        }
    }
    return r;
}

double dynamic_critical_current(const DeviceParams& p, MtjState initial, const LlgsOptions& opt,
                                double rel_tol, double lo, double hi) {
    const double ic = critical_current(p);
    const double sign = initial == MtjState::P ? 1.0 : -1.0;  // P->AP needs positive current
    auto switches = [&](double f) { return llgs_simulate(p, sign * f * ic, initial, opt).switched; };
    if (switches(lo)) throw ConvergenceError("switching already at the lower bisection bound", lo);
    if (!switches(hi)) throw ConvergenceError("no switching at the upper bisection bound", hi);
    while ((hi - lo) / hi > rel_tol) {
        const double mid = 0.5 * (lo + hi);
        (switches(mid) ? hi : lo) = mid;
    }
    return hi * ic;
}

namespace {

struct WriteCycle {
    TerminalVoltages tv;
    CellWeight start;
    CellWeight target;
    int pulse_class = 0;
};

using WriteProgram = std::vector<WriteCycle>;

TerminalVoltages tv_of(double bl, double blb, double sl, double slb, double wl, double wwl) {
    TerminalVoltages t;
    t.v_bl = bl;
    t.v_blb = blb;
    t.v_sl = sl;
    t.v_slb = slb;
    t.v_wl = wl;
    t.v_wwl = wwl;
    return t;
}

// Current from the pinned layer (bitline side) into the free layer
// anti-parallelizes, so the bitline is driven high to write AP.
std::vector<WriteProgram> write_programs(BitcellKind kind, const WriteScheme& s) {
    using S = MtjState;
    const double v = s.v_write;
    switch (kind) {
        case BitcellKind::OneT1MTJ:
            return {{{tv_of(v, 0, 0, 0, v, 0), {S::P, S::AP}, {S::AP, S::P}, 0}},
                    {{tv_of(0, 0, v, 0, v, 0), {S::AP, S::P}, {S::P, S::AP}, 0}}};
        case BitcellKind::TwoT2MTJ:
            return {{{tv_of(0, v, v, 0, v, 0), CellWeight::app(), CellWeight::pap(), 0}},
                    {{tv_of(v, 0, 0, v, v, 0), CellWeight::pap(), CellWeight::app(), 0}}};
        case BitcellKind::StrideI:
            return {{{tv_of(0, v, 0, 0, 0, v), CellWeight::app(), CellWeight::pap(), 0}},
                    {{tv_of(v, 0, 0, 0, 0, v), CellWeight::pap(), CellWeight::app(), 0}}};
        case BitcellKind::StrideII: {
            const double vp = s.v_write_p;
            const double va = s.v_write_ap;
            // class 0: cycle writing P, class 1: cycle writing AP
            return {{{tv_of(0, vp, vp, vp, vp, 0), {S::AP, S::P}, {S::P, S::P}, 0},
                     {tv_of(va, va, va, 0, va, 0), {S::P, S::P}, {S::P, S::AP}, 1}},
                    {{tv_of(va, va, 0, va, va, 0), {S::P, S::AP}, {S::AP, S::AP}, 1},
                     {tv_of(vp, 0, vp, vp, vp, 0), {S::AP, S::AP}, {S::AP, S::P}, 0}}};
        }
    }
    return {};
}

struct CycleRun {
    double switch_ns = 0.0;
    bool switched = false;
    double energy_j = 0.0;
};

// Simulates one write cycle. With pulse_ns <= 0 it stops once every target
// MTJ has switched; otherwise it runs for exactly pulse_ns.
CycleRun run_cycle(BitcellKind kind, const WriteCycle& cyc, const DeviceParams& p,
                   const LlgsOptions& opt, double pulse_ns) {
    Circuit c;
    const auto& tv = cyc.tv;
    CellTerminals t{c.add_fixed(tv.v_bl), c.add_fixed(tv.v_blb), c.add_fixed(tv.v_sl),
                    c.add_fixed(tv.v_slb), c.add_fixed(tv.v_wl), c.add_fixed(tv.v_wwl)};
    const CellStamp st = stamp_bitcell(c, kind, cyc.start, t, p);
    const int n_mtj = is_two_mtj(kind) ? 2 : 1;

    std::vector<Macrospin> spins;
    std::vector<bool> target;
    const std::array<MtjState, 2> start{cyc.start.left, cyc.start.right};
    const std::array<MtjState, 2> goal{cyc.target.left, cyc.target.right};
    for (int k = 0; k < n_mtj; ++k) {
        spins.emplace_back(p, start[static_cast<std::size_t>(k)], opt.tilt_deg);
        target.push_back(start[static_cast<std::size_t>(k)] != goal[static_cast<std::size_t>(k)]);
    }
    const std::array<Circuit::NodeId, 6> supplies{t.bl, t.blb, t.sl, t.slb, t.wl, t.wwl};

    CycleRun run;
    const double horizon = pulse_ns > 0.0 ? pulse_ns : opt.horizon_ns;
    const auto steps = static_cast<long>(std::ceil(horizon / opt.dt_ns - 1e-9));
    std::vector<double> last_w(static_cast<std::size_t>(n_mtj), -1.0);
    std::vector<double> i_mtj(static_cast<std::size_t>(n_mtj), 0.0);
    double power = 0.0;
    int since_solve = 1 << 30;
    for (long k = 0; k < steps; ++k) {
        double dw = 0.0;
        for (int j = 0; j < n_mtj; ++j) {
            dw = std::max(dw, std::abs(spins[static_cast<std::size_t>(j)].ap_fraction() -
                                       last_w[static_cast<std::size_t>(j)]));
        }
        if (dw > 1e-4 || since_solve >= 50) {
            for (int j = 0; j < n_mtj; ++j) {
                const auto sj = static_cast<std::size_t>(j);
                last_w[sj] = spins[sj].ap_fraction();
                c.set_mtj_ap_fraction(static_cast<std::size_t>(st.mtj_resistor[sj]), last_w[sj]);
            }
            const auto sol = c.solve();
            for (auto n : st.internal) c.set_guess(n, sol.voltages[static_cast<std::size_t>(n)]);
            for (int j = 0; j < n_mtj; ++j) {
                const auto sj = static_cast<std::size_t>(j);
                i_mtj[sj] = c.mtj_current(static_cast<std::size_t>(st.mtj_resistor[sj]), sol.voltages);
            }
            const auto nc = c.node_currents(sol.voltages);
            power = 0.0;
            for (auto n : supplies) {
                power += sol.voltages[static_cast<std::size_t>(n)] * nc[static_cast<std::size_t>(n)];
            }
            since_solve = 0;
        }
        ++since_solve;
        for (int j = 0; j < n_mtj; ++j) {
            const auto sj = static_cast<std::size_t>(j);
            spins[sj].step(i_mtj[sj], opt.dt_ns);
        }
        run.energy_j += power * opt.dt_ns * 1e-9;
        if (!run.switched) {
            bool all = true;
            for (int j = 0; j < n_mtj; ++j) {
                const auto sj = static_cast<std::size_t>(j);
                if (target[sj] && spins[sj].m()[2] * spins[sj].initial_sign() >= -opt.switch_threshold) {
                    all = false;
                }
            }
            if (all) {
                run.switched = true;
                run.switch_ns = static_cast<double>(k + 1) * opt.dt_ns;
                if (pulse_ns <= 0.0) break;
            }
        }
    }
    return run;
}

}  // namespace

WriteCost write_cycle_cost(BitcellKind kind, const WriteScheme& scheme, const DeviceParams& p) {
    p.validate();
    const auto programs = write_programs(kind, scheme);
    std::map<int, double> pulse;
    WriteCost cost;
    cost.switched = true;
    std::size_t slowest = 0;
    double slowest_t = -1.0;
    for (std::size_t i = 0; i < programs.size(); ++i) {
        double total = 0.0;
        for (const auto& cyc : programs[i]) {
            const CycleRun r = run_cycle(kind, cyc, p, scheme.llgs, 0.0);
            if (!r.switched) cost.switched = false;
            if (scheme.energy == WriteEnergy::UntilSwitched) cost.energy_j += r.energy_j;
            const double t = r.switched ? r.switch_ns : scheme.llgs.horizon_ns;
            total += t;
            pulse[cyc.pulse_class] = std::max(pulse[cyc.pulse_class], t);
        }
        if (total > slowest_t) {
            slowest_t = total;
            slowest = i;
        }
    }
    for (const auto& [cls, t] : pulse) cost.latency_ns += t;
    auto pulsed = [&](const WriteProgram& prog) {
        double e = 0.0;
        for (const auto& cyc : prog) {
            e += run_cycle(kind, cyc, p, scheme.llgs, pulse[cyc.pulse_class]).energy_j;
        }
        return e;
    };
    switch (scheme.energy) {
        case WriteEnergy::WorstCase: cost.energy_j = pulsed(programs[slowest]); break;
        case WriteEnergy::FixedPulse:
            for (const auto& prog : programs) cost.energy_j += pulsed(prog);
            cost.energy_j /= static_cast<double>(programs.size());
            break;
        case WriteEnergy::UntilSwitched:
            cost.energy_j /= static_cast<double>(programs.size());
            break;
    }
    return cost;
}

WriteComparison compare_write_cost(BitcellKind kind, const WriteScheme& scheme,
                                   const DeviceParams& p) {
    WriteComparison out;
    out.reference = write_cycle_cost(BitcellKind::OneT1MTJ, scheme, p);
    out.cost = kind == BitcellKind::OneT1MTJ ? out.reference : write_cycle_cost(kind, scheme, p);
    if (!out.reference.switched) {
        throw ConvergenceError("reference 1T-1MTJ write did not switch within the horizon", 0.0);
    }
    out.latency_ratio = out.cost.latency_ns / out.reference.latency_ns;
    out.energy_ratio = out.cost.energy_j / out.reference.energy_j;
    return out;
}

}  // namespace xbar
