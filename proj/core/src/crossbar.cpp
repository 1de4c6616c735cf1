#include "xbar/crossbar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "xbar/errors.hpp"
#include "xbar/report.hpp"

namespace xbar {

void CrossbarConfig::validate() const {
    if (rows == 0 || cols == 0) throw ParameterError("crossbar rows and cols must be >= 1");
    auto nonneg = [](double v, const char* n) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw ParameterError(std::string("crossbar '") + n + "' must be finite and >= 0");
        }
    };
    nonneg(r_driver, "r_driver");
    nonneg(r_wire, "r_wire");
    nonneg(r_sink, "r_sink");
    if (!(v_read > 0.0) || !std::isfinite(v_read)) throw ParameterError("v_read must be > 0");
    if (!(v_wl >= 0.0) || !std::isfinite(v_wl)) throw ParameterError("v_wl must be >= 0");
}

CrossbarArray build_array(const CrossbarConfig& cfg, std::span<const CellWeight> weights) {
    cfg.validate();
    if (weights.size() != cfg.rows * cfg.cols) {
        throw ParameterError("weight count " + std::to_string(weights.size()) + " does not match " +
                             std::to_string(cfg.rows) + "x" + std::to_string(cfg.cols));
    }
    for (auto w : weights) validate_weight(cfg.kind, w);
    CrossbarArray a;
    a.cfg = cfg;
    a.weights.assign(weights.begin(), weights.end());
    return a;
}

namespace {

void check_inputs(const CrossbarArray& a, std::span<const std::uint8_t> wl_on) {
    if (wl_on.size() != a.cfg.rows) throw ParameterError("wordline vector length must equal rows");
    if (a.weights.size() != a.cfg.rows * a.cfg.cols) throw ParameterError("array weights are incomplete");
    if (!a.current_scale.empty() && a.current_scale.size() != a.weights.size()) {
        throw ParameterError("current_scale must be empty or one entry per cell");
    }
    if (!a.device_var.empty() && a.device_var.size() != a.weights.size()) {
        throw ParameterError("device_var must be empty or one entry per cell");
    }
}

// Cell current -> SL/SLB attribution.
void add_sink(BitcellKind k, double il, double ir, LineCurrents& lc) {
    switch (k) {
        case BitcellKind::OneT1MTJ: lc.i_sl += il; break;
        case BitcellKind::StrideI: lc.i_sl += il + ir; break;
        case BitcellKind::TwoT2MTJ:
        case BitcellKind::StrideII:
            lc.i_sl += il;
            lc.i_slb += ir;
            break;
    }
}

// Forward ladder: line voltages from per-row cell currents.
void ladder(double v_src, double r_d, double r_w, std::span<const double> i_cell,
            std::span<double> v_out) {
    double suffix = 0.0;
    for (double i : i_cell) suffix += i;
    double v = v_src - r_d * suffix;
    for (std::size_t r = 0; r < i_cell.size(); ++r) {
        if (r > 0) {
            suffix -= i_cell[r - 1];
            v -= r_w * suffix;
        }
        v_out[r] = std::max(v, 0.0);  // the physical solution stays in [0, v_src]
    }
}

struct ColumnState {
    std::vector<double> vbl, vblb, il, ir;
    LineCurrents lines;
    int iterations = 0;
    double last_update = 0.0;
};

ColumnState run_column(const CrossbarArray& a, std::size_t col, std::span<const std::uint8_t> wl_on,
                       const DeviceParams& params, const BitcellLut* lut, const SolveOptions& opt) {
    const auto& cfg = a.cfg;
    const std::size_t n = cfg.rows;
    const bool two = is_two_mtj(cfg.kind);
    ColumnState s;
    s.vbl.assign(n, cfg.v_read);
    s.vblb.assign(n, two ? cfg.v_read : 0.0);
    s.il.assign(n, 0.0);
    s.ir.assign(n, 0.0);
    std::vector<double> nbl(n), nblb(n);
    std::vector<std::vector<double>> guess(lut ? 0 : n);
    double vsl = 0.0, vslb = 0.0;

    auto cell_currents = [&](bool first) {
        for (std::size_t r = 0; r < n; ++r) {
            const std::size_t k = r * cfg.cols + col;
            const CellWeight w = a.weights[k];
            double il, ir;
            if (lut) {
                const auto c = lut->lookup(w, wl_on[r] != 0, s.vbl[r], s.vblb[r]);
                il = c.i_left;
                ir = c.i_right;
            } else {
                TerminalVoltages tv;
                tv.v_bl = s.vbl[r];
                tv.v_blb = s.vblb[r];
                tv.v_sl = vsl;
                tv.v_slb = vslb;
                tv.v_wl = wl_on[r] ? cfg.v_wl : 0.0;
                const CellVariation var = a.device_var.empty() ? CellVariation{} : a.device_var[k];
                std::vector<double> out;
                const auto b = first ? solve_bitcell_dc(cfg.kind, w, tv, params, var, &out)
                                     : solve_bitcell_dc_warm(cfg.kind, w, tv, params, var, guess[r], out);
                guess[r] = std::move(out);
                il = b.i_left;
                ir = b.i_right;
            }
            if (!a.current_scale.empty()) {
                il *= a.current_scale[k][0];
                ir *= a.current_scale[k][1];
            }
            s.il[r] = il;
            s.ir[r] = ir;
        }
        s.lines = {};
        for (std::size_t r = 0; r < n; ++r) {
            s.lines.i_bl += s.il[r];
            s.lines.i_blb += s.ir[r];
            add_sink(cfg.kind, s.il[r], s.ir[r], s.lines);
        }
    };

    double lam = opt.damping;
    double prev = std::numeric_limits<double>::infinity();
    std::vector<double> trace;
    for (int it = 1; it <= opt.max_iter; ++it) {
        cell_currents(it == 1);
        ladder(cfg.v_read, cfg.r_driver, cfg.r_wire, s.il, nbl);
        if (two) ladder(cfg.v_read, cfg.r_driver, cfg.r_wire, s.ir, nblb);
        double upd = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            upd = std::max(upd, std::abs(nbl[r] - s.vbl[r]));
            if (two) upd = std::max(upd, std::abs(nblb[r] - s.vblb[r]));
        }
        double nsl = 0.0, nslb = 0.0;
        if (cfg.r_sink > 0.0) {
            nsl = cfg.r_sink * s.lines.i_sl;
            nslb = cfg.r_sink * s.lines.i_slb;
            upd = std::max({upd, std::abs(nsl - vsl), std::abs(nslb - vslb)});
        }
        s.iterations = it;
        s.last_update = upd;
        trace.push_back(upd);
        if (trace.size() > 8) trace.erase(trace.begin());
        // Near-marginal contraction (latch gain against the line resistance)
        // makes the raw update a poor error bound; also require the
        // geometric tail estimate to be below tol.
        const double rho = std::isfinite(prev) && prev > 0.0 ? upd / prev : 1.0;
        const double tail = rho < 1.0 ? upd * rho / (1.0 - rho) : std::numeric_limits<double>::infinity();
        if (upd < opt.tol && (tail < opt.tol || upd == 0.0)) return s;
        if (upd > prev) lam = std::max(lam * 0.5, opt.min_damping);
        prev = upd;
        for (std::size_t r = 0; r < n; ++r) {
            s.vbl[r] += lam * (nbl[r] - s.vbl[r]);
            if (two) s.vblb[r] += lam * (nblb[r] - s.vblb[r]);
        }
        vsl += lam * (nsl - vsl);
        vslb += lam * (nslb - vslb);
    }
    throw ConvergenceError("crossbar column " + std::to_string(col) + " did not converge in " +
                               std::to_string(opt.max_iter) + " iterations",
                           s.last_update, trace);
}

void check_lut(const CrossbarArray& a, const DeviceParams& params, const BitcellLut* lut) {
    if (!lut) return;
    if (a.cfg.r_sink > 0.0) {
        throw ParameterError("LUT-based solve assumes an ideal SL; use device-level cells with r_sink > 0");
    }
    if (lut->kind() != a.cfg.kind) throw ParameterError("LUT was built for a different bitcell kind");
    if (lut->params_hash() != params_hash(params)) {
        throw ParameterError("LUT was built for different device parameters");
    }
    if (a.cfg.v_read > lut->v_max() + 1e-12) throw ParameterError("v_read exceeds the LUT range");
    if (std::abs(lut->v_wl() - a.cfg.v_wl) > 1e-12) {
        throw ParameterError("LUT wordline level differs from the array's v_wl");
    }
}

}  // namespace

LineCurrents solve_column(const CrossbarArray& array, std::size_t col,
                          std::span<const std::uint8_t> wl_on, const DeviceParams& params,
                          const BitcellLut* lut, const SolveOptions& opt, int* iterations) {
    check_inputs(array, wl_on);
    check_lut(array, params, lut);
    if (col >= array.cfg.cols) throw ParameterError("column index out of range");
    auto s = run_column(array, col, wl_on, params, lut, opt);
    if (iterations) *iterations = s.iterations;
    return s.lines;
}

CrossbarSolution solve_iterative(const CrossbarArray& array, std::span<const std::uint8_t> wl_on,
                                 const DeviceParams& params, const BitcellLut* lut,
                                 const SolveOptions& opt) {
    check_inputs(array, wl_on);
    check_lut(array, params, lut);
    if (!lut) params.validate();
    const auto& cfg = array.cfg;
    CrossbarSolution out;
    out.columns.resize(cfg.cols);
    out.v_bl.assign(cfg.rows * cfg.cols, 0.0);
    out.v_blb.assign(cfg.rows * cfg.cols, 0.0);
    for (std::size_t c = 0; c < cfg.cols; ++c) {
        auto s = run_column(array, c, wl_on, params, lut, opt);
        out.columns[c] = s.lines;
        for (std::size_t r = 0; r < cfg.rows; ++r) {
            out.v_bl[r * cfg.cols + c] = s.vbl[r];
            out.v_blb[r * cfg.cols + c] = s.vblb[r];
        }
        out.iterations = std::max(out.iterations, s.iterations);
        out.max_update = std::max(out.max_update, s.last_update);
    }
    return out;
}

CrossbarSolution solve_dense_oracle(const CrossbarArray& array, std::span<const std::uint8_t> wl_on,
                                    const DeviceParams& params) {
    check_inputs(array, wl_on);
    params.validate();
    const auto& cfg = array.cfg;
    if (cfg.rows * cfg.cols > 256) throw ParameterError("dense oracle is limited to rows*cols <= 256");
    const bool two = is_two_mtj(cfg.kind);

    Circuit c;
    const auto drv = c.add_fixed(0.0);
    const auto gnd = c.add_fixed(0.0);
    const auto wl_hi = c.add_fixed(cfg.v_wl);
    auto line = [&](std::vector<Circuit::NodeId>& nodes) {
        nodes.resize(cfg.rows);
        Circuit::NodeId prev = drv;
        for (std::size_t r = 0; r < cfg.rows; ++r) {
            const double rr = r == 0 ? cfg.r_driver : cfg.r_wire;
            if (rr > 0.0) {
                const auto nn = c.add_node(cfg.v_read);
                c.add_resistor(prev, nn, rr);
                prev = nn;
            }
            nodes[r] = prev;
        }
    };
    auto sink = [&]() {
        if (cfg.r_sink <= 0.0) return gnd;
        const auto s = c.add_node(0.0);
        c.add_resistor(s, gnd, cfg.r_sink);
        return s;
    };
    struct Col {
        std::vector<Circuit::NodeId> bl, blb;
        std::vector<CellStamp> cells;
    };
    std::vector<Col> cols(cfg.cols);
    for (std::size_t j = 0; j < cfg.cols; ++j) {
        auto& cl = cols[j];
        line(cl.bl);
        if (two) {
            line(cl.blb);
        } else {
            cl.blb.assign(cfg.rows, gnd);
        }
        const auto sl = sink();
        const auto slb = two ? sink() : gnd;
        for (std::size_t r = 0; r < cfg.rows; ++r) {
            const std::size_t k = r * cfg.cols + j;
            CellTerminals t{cl.bl[r], cl.blb[r], sl, slb, wl_on[r] ? wl_hi : gnd, gnd};
            const CellVariation var = array.device_var.empty() ? CellVariation{} : array.device_var[k];
            cl.cells.push_back(stamp_bitcell(c, cfg.kind, array.weights[k], t, params, var));
        }
    }

    Circuit::Solution sol;
    if (is_stride(cfg.kind)) {
        // same resolution as a lone cell: drivers step on, the whole
        // discharged array follows the transient, then a DC polish
        using T = LatchTransient;
        c.set_fixed(drv, cfg.v_read);
        std::vector<double> v(c.node_count(), 0.0);
        Circuit::Options opt;
        double dt = T::first_step;
        for (double t = 0.0; t < T::max_time; t += dt, dt *= T::step_growth) {
            Circuit::Solution next;
            for (;;) {
                try {
                    next = c.transient_step(v, T::node_cap / dt, opt);
                    break;
                } catch (const ConvergenceError&) {
                    // a long starved column can need a shorter first step
                    if (dt < 1e-18) throw;
                    dt *= 0.25;
                }
            }
            double change = 0.0;
            for (std::size_t k = 0; k < v.size(); ++k) change = std::max(change, std::abs(next.voltages[k] - v[k]));
            v = std::move(next.voltages);
            if (change < T::settled_v) break;
        }
        for (std::size_t nidx = 0; nidx < c.node_count(); ++nidx) {
            const auto id = static_cast<Circuit::NodeId>(nidx);
            if (!c.is_fixed(id)) c.set_guess(id, v[nidx]);
        }
        sol = c.solve();
    } else {
        // no latch: ramp the drivers up from the discharged array
        constexpr int kSteps = 8;
        for (int s = 1; s <= kSteps; ++s) {
            c.set_fixed(drv, cfg.v_read * s / kSteps);
            for (std::size_t nidx = 0; nidx < c.node_count(); ++nidx) {
                const auto id = static_cast<Circuit::NodeId>(nidx);
                if (!c.is_fixed(id)) c.set_guess(id, s > 1 ? sol.voltages[nidx] : 0.0);
            }
            sol = c.solve();
        }
    }

    CrossbarSolution out;
    out.columns.resize(cfg.cols);
    out.v_bl.assign(cfg.rows * cfg.cols, 0.0);
    out.v_blb.assign(cfg.rows * cfg.cols, 0.0);
    out.iterations = sol.iterations;
    out.max_update = sol.max_residual;
    const auto& v = sol.voltages;
    for (std::size_t j = 0; j < cfg.cols; ++j) {
        auto& lc = out.columns[j];
        for (std::size_t r = 0; r < cfg.rows; ++r) {
            const auto& st = cols[j].cells[r];
            const double il = c.mtj_current(static_cast<std::size_t>(st.mtj_resistor[0]), v);
            const double ir =
                st.mtj_resistor[1] >= 0 ? c.mtj_current(static_cast<std::size_t>(st.mtj_resistor[1]), v) : 0.0;
            lc.i_bl += il;
            lc.i_blb += ir;
            add_sink(cfg.kind, il, ir, lc);
            out.v_bl[r * cfg.cols + j] = v[static_cast<std::size_t>(cols[j].bl[r])];
            out.v_blb[r * cfg.cols + j] = v[static_cast<std::size_t>(cols[j].blb[r])];
        }
    }
    return out;
}

double worst_case_vread(double v_read, double i_high, std::size_t pwa, std::size_t n,
                        double r_driver, double r_wire) {
    if (pwa == 0 || pwa > n) throw ParameterError("pwa must be in [1, rows]");
    const double p = static_cast<double>(pwa);
    const double tri = p * (p + 1.0) / 2.0;
    return v_read - i_high * p * (r_driver + static_cast<double>(n - pwa - 1) * r_wire) -
           i_high * r_wire * tri;
}

double wire_resistance_for_vread(double v_target, double v_read, double i_high, std::size_t pwa,
                                 std::size_t n, double r_driver) {
    const double v0 = worst_case_vread(v_read, i_high, pwa, n, r_driver, 0.0);
    const double v1 = worst_case_vread(v_read, i_high, pwa, n, r_driver, 1.0);
    const double slope = v1 - v0;  // linear in r_wire
    if (slope == 0.0) throw ParameterError("worst-case V_READ does not depend on r_wire");
    const double r = (v_target - v0) / slope;
    if (!(r >= 0.0)) throw ParameterError("target V_READ not reachable with r_wire >= 0");
    return r;
}

double default_read_voltage(BitcellKind kind, const DeviceParams& params) {
    if (kind == BitcellKind::StrideI) return kStrideIReadVoltage;
    return vread_for_current(kind, params, kTargetReadCurrent);
}

double default_wire_resistance(BitcellKind kind) {
    return kind == BitcellKind::StrideI ? 2.393 : 1.801;
}

CrossbarConfig default_crossbar_config(BitcellKind kind, const DeviceParams& params) {
    CrossbarConfig c;
    c.kind = kind;
    c.v_read = default_read_voltage(kind, params);
    c.r_wire = default_wire_resistance(kind);
    c.v_wl = params.vdd;
    return c;
}

void write_solution_csv(std::ostream& os, const CrossbarSolution& s) {
    CsvWriter w(os);
    w.row({"column", "i_bl", "i_blb", "i_sl", "i_slb"});
    for (std::size_t j = 0; j < s.columns.size(); ++j) {
        const auto& c = s.columns[j];
        w.cell(j).cell(c.i_bl).cell(c.i_blb).cell(c.i_sl).cell(c.i_slb).end_row();
    }
}

std::string solution_json(const CrossbarSolution& s) {
    nlohmann::ordered_json j;
    j["iterations"] = s.iterations;
    j["max_update"] = s.max_update;
    auto cols = nlohmann::ordered_json::array();
    for (const auto& c : s.columns) {
        cols.push_back({{"i_bl", c.i_bl}, {"i_blb", c.i_blb}, {"i_sl", c.i_sl}, {"i_slb", c.i_slb}});
    }
    j["columns"] = cols;
    return j.dump(2);
}

}  // namespace xbar
