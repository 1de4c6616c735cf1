#include "xbar/imc.hpp"

#include <string>

#include "xbar/errors.hpp"

namespace xbar {

std::string_view to_string(ImcMode m) { return m == ImcMode::Xnor ? "XNOR" : "AND"; }

ImcMode parse_mode(std::string_view s) {
    if (s == "XNOR" || s == "xnor") return ImcMode::Xnor;
    if (s == "AND" || s == "and") return ImcMode::And;
    throw ParameterError("unknown IMC mode '" + std::string(s) + "'");
}

std::vector<std::uint8_t> encode_inputs_xnor(std::span<const int> in) {
    std::vector<std::uint8_t> out;
    out.reserve(in.size());
    for (int x : in) {
        if (x != -1 && x != 1) throw ParameterError("XNOR inputs must be -1 or +1");
        out.push_back(static_cast<std::uint8_t>((x + 1) / 2));
    }
    return out;
}

CellWeight map_weight(ImcMode mode, BitcellKind kind, int w) {
    bool one;
    if (mode == ImcMode::Xnor) {
        if (w != -1 && w != 1) throw ParameterError("XNOR weights must be -1 or +1");
        one = w == 1;
    } else {
        if (w != 0 && w != 1) throw ParameterError("AND weights must be 0 or 1");
        one = w == 1;
    }
    if (!is_two_mtj(kind)) return CellWeight::single(one ? MtjState::P : MtjState::AP);
    return one ? CellWeight::pap() : CellWeight::app();
}

std::vector<CellWeight> map_weights(ImcMode mode, BitcellKind kind, std::span<const int> w) {
    std::vector<CellWeight> out;
    out.reserve(w.size());
    for (int x : w) out.push_back(map_weight(mode, kind, x));
    return out;
}

std::array<std::vector<std::uint8_t>, 4> bit_slice_weights(std::span<const int> w) {
    std::array<std::vector<std::uint8_t>, 4> planes;
    for (auto& p : planes) p.reserve(w.size());
    for (int x : w) {
        if (x < -8 || x > 7) throw ParameterError("4-bit weights must lie in [-8, 7]");
        const unsigned u = static_cast<unsigned>(x) & 0xfu;
        for (unsigned b = 0; b < 4; ++b) planes[b].push_back(static_cast<std::uint8_t>((u >> b) & 1u));
    }
    return planes;
}

long long bit_stream_accumulate(std::span<const long long> outputs, int input_bits, int weight_bits) {
    if (input_bits < 1 || weight_bits < 1 ||
        outputs.size() != static_cast<std::size_t>(input_bits * weight_bits)) {
        throw ParameterError("bit_stream_accumulate: output count must be input_bits * weight_bits");
    }
    long long acc = 0;
    for (int i = 0; i < input_bits; ++i) {
        for (int j = 0; j < weight_bits; ++j) {
            const long long term = outputs[static_cast<std::size_t>(i * weight_bits + j)] << (i + j);
            acc += j == weight_bits - 1 ? -term : term;
        }
    }
    return acc;
}

double sense_output(BitcellKind kind, ImcMode mode, const LineCurrents& col, const LineCurrents* dummy,
                    double gain) {
    switch (kind) {
        case BitcellKind::OneT1MTJ:
            return gain * dummy_column_correct(col.i_sl, dummy ? dummy->i_sl : 0.0);
        case BitcellKind::TwoT2MTJ: return gain * (col.i_bl - col.i_blb);
        case BitcellKind::StrideI:
            return mode == ImcMode::Xnor ? gain * (col.i_blb - col.i_bl) : col.i_blb;
        case BitcellKind::StrideII:
            return mode == ImcMode::Xnor ? gain * (col.i_slb - col.i_sl) : col.i_slb;
    }
    return 0.0;
}

bool signed_output(BitcellKind kind, ImcMode mode) {
    if (kind == BitcellKind::OneT1MTJ) return false;
    if (kind == BitcellKind::TwoT2MTJ) return true;
    return mode == ImcMode::Xnor;
}

int group_output(BitcellKind kind, ImcMode mode, int code, int n_asserted, int sum_w) {
    switch (kind) {
        case BitcellKind::OneT1MTJ:
            // AND count a; XNOR = 4a - 2 sum(In') - sum(W)
            return mode == ImcMode::And ? code : 4 * code - 2 * n_asserted - sum_w;
        case BitcellKind::TwoT2MTJ: {
            if (mode == ImcMode::Xnor) return postprocess_xnor(code, sum_w);
            const int t = code + n_asserted;  // = 2 * AND on exact outputs
            return t >= 0 ? t / 2 : -((-t + 1) / 2);
        }
        case BitcellKind::StrideI:
        case BitcellKind::StrideII:
            return mode == ImcMode::Xnor ? postprocess_xnor(code, sum_w) : code;
    }
    return 0;
}

double unit_current(BitcellKind kind, const DeviceParams& params, double v_read) {
    const auto pt = read_currents(kind, params, v_read);
    return pt.i_high - pt.i_low;
}

CrossbarArray make_dummy_column(const CrossbarConfig& cfg) {
    CrossbarConfig c = cfg;
    c.cols = 1;
    std::vector<CellWeight> w(c.rows, CellWeight::single(MtjState::AP));
    if (is_two_mtj(c.kind)) w.assign(c.rows, CellWeight::app());
    return build_array(c, w);
}

ImcResult run_imc_column_pass(const CrossbarArray& array, const CrossbarArray* dummy,
                              const ImcOperation& op, ImcMode mode, const ImcContext& ctx) {
    const auto& cfg = array.cfg;
    if (!ctx.params) throw ParameterError("IMC context needs device parameters");
    if (op.in_prime.size() != cfg.rows) throw ParameterError("input length must equal array rows");
    if (op.pwa == 0) throw ParameterError("pwa must be >= 1");
    for (auto b : op.in_prime) {
        if (b > 1) throw ParameterError("IMC inputs must be binary");
    }
    CrossbarArray own_dummy;
    if (cfg.kind == BitcellKind::OneT1MTJ && dummy == nullptr) {
        own_dummy = make_dummy_column(cfg);
        dummy = &own_dummy;
    }
    if (dummy && (dummy->cfg.rows != cfg.rows || dummy->cfg.kind != cfg.kind)) {
        throw ParameterError("dummy column does not match the array");
    }

    ImcResult r;
    r.groups = (cfg.rows + op.pwa - 1) / op.pwa;
    r.i_out.assign(r.groups, std::vector<double>(cfg.cols, 0.0));
    r.n_asserted.assign(r.groups, 0);
    std::vector<std::uint8_t> wl(cfg.rows, 0);
    for (std::size_t g = 0; g < r.groups; ++g) {
        std::fill(wl.begin(), wl.end(), 0);
        int n = 0;
        for (std::size_t k = g * op.pwa; k < std::min(cfg.rows, (g + 1) * op.pwa); ++k) {
            wl[k] = op.in_prime[k];
            n += op.in_prime[k];
        }
        r.n_asserted[g] = n;
        if (n == 0) continue;
        try {
            const auto sol = solve_iterative(array, wl, *ctx.params, ctx.lut, ctx.solve);
            LineCurrents dl{};
            if (dummy) dl = solve_iterative(*dummy, wl, *ctx.params, ctx.lut, ctx.solve).columns[0];
            for (std::size_t c = 0; c < cfg.cols; ++c) {
                r.i_out[g][c] = sense_output(cfg.kind, mode, sol.columns[c], dummy ? &dl : nullptr,
                                             ctx.subtractor_gain);
            }
        } catch (const ConvergenceError& e) {
            throw ConvergenceError("IMC cycle " + std::to_string(g) + ": " + e.what(),
                                   e.last_residual(), e.trace_tail());
        }
    }
    return r;
}

std::vector<long long> digitize_pass(const ImcResult& r, const CrossbarArray& array,
                                     std::span<const int> logical_weights, ImcMode mode,
                                     std::size_t pwa, const AdcConfig& adc_in) {
    const auto& cfg = array.cfg;
    if (logical_weights.size() != cfg.rows * cfg.cols) {
        throw ParameterError("logical weight matrix does not match the array");
    }
    AdcConfig adc = adc_in;
    adc.is_signed = signed_output(cfg.kind, mode);
    std::vector<long long> out(cfg.cols, 0);
    for (std::size_t g = 0; g < r.groups; ++g) {
        // idle groups still carry the -sum(W) term in XNOR
        const std::size_t r0 = g * pwa, r1 = std::min(cfg.rows, (g + 1) * pwa);
        for (std::size_t c = 0; c < cfg.cols; ++c) {
            int sum_w = 0;
            for (std::size_t k = r0; k < r1; ++k) sum_w += logical_weights[k * cfg.cols + c];
            const int code = r.n_asserted[g] == 0 ? 0 : quantize(r.i_out[g][c], adc);
            out[c] += group_output(cfg.kind, mode, code, r.n_asserted[g], sum_w);
        }
    }
    return out;
}

}  // namespace xbar
