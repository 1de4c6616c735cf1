#include "xbar/robustness.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "xbar/errors.hpp"

namespace xbar {

namespace {

int draw_weight(ImcMode mode, std::mt19937_64& rng) {
    const int b = static_cast<int>(rng() & 1u);
    return mode == ImcMode::Xnor ? 2 * b - 1 : b;
}

bool weight_is_one(int w) { return w == 1; }

}  // namespace

std::vector<SmPass> sample_sm_passes(const CrossbarConfig& cfg, ImcMode mode, std::size_t pwa,
                                     std::size_t n_combos, std::uint64_t seed) {
    cfg.validate();
    if (pwa == 0 || pwa > cfg.rows) throw ParameterError("pwa must be in [1, rows]");
    if (n_combos == 0) throw ParameterError("combo count must be positive");
    const std::size_t groups = (cfg.rows + pwa - 1) / pwa;
    const std::size_t n_pass = (n_combos + cfg.cols - 1) / cfg.cols;
    std::vector<SmPass> out(n_pass);
    for (std::size_t p = 0; p < n_pass; ++p) {
        auto rng = substream(seed, p);
        auto& ps = out[p];
        ps.group = static_cast<std::size_t>(rng() % groups);
        ps.in_prime.assign(cfg.rows, 0);
        for (std::size_t r = ps.group * pwa; r < std::min(cfg.rows, (ps.group + 1) * pwa); ++r) {
            ps.in_prime[r] = static_cast<std::uint8_t>(rng() & 1u);
        }
        ps.weights.resize(cfg.rows * cfg.cols);
        for (auto& w : ps.weights) w = draw_weight(mode, rng);
    }
    return out;
}

std::vector<SmPass> exhaustive_sm_passes(const CrossbarConfig& cfg, ImcMode mode, std::size_t pwa) {
    cfg.validate();
    if (cfg.rows != pwa || pwa > 8) throw ParameterError("exhaustive combos need rows == pwa <= 8");
    const std::size_t n = std::size_t{1} << pwa;
    std::vector<SmPass> out;
    for (std::size_t in = 0; in < n; ++in) {
        for (std::size_t w0 = 0; w0 < n; w0 += cfg.cols) {
            SmPass ps;
            ps.group = 0;
            ps.in_prime.resize(pwa);
            for (std::size_t r = 0; r < pwa; ++r) ps.in_prime[r] = static_cast<std::uint8_t>((in >> r) & 1u);
            ps.weights.assign(cfg.rows * cfg.cols, mode == ImcMode::Xnor ? -1 : 0);
            for (std::size_t c = 0; c < cfg.cols; ++c) {
                const std::size_t w = (w0 + c) % n;
                for (std::size_t r = 0; r < pwa; ++r) {
                    const int b = static_cast<int>((w >> r) & 1u);
                    ps.weights[r * cfg.cols + c] = mode == ImcMode::Xnor ? 2 * b - 1 : b;
                }
            }
            out.push_back(std::move(ps));
        }
    }
    return out;
}

int ideal_group_state(BitcellKind kind, ImcMode mode, std::span<const std::uint8_t> in_prime,
                      std::span<const int> column_weights) {
    if (in_prime.size() != column_weights.size()) throw ParameterError("input/weight length mismatch");
    int ones = 0, n = 0;
    for (std::size_t r = 0; r < in_prime.size(); ++r) {
        if (!in_prime[r]) continue;
        ++n;
        ones += weight_is_one(column_weights[r]) ? 1 : 0;
    }
    return signed_output(kind, mode) ? 2 * ones - n : ones;
}

SmAnalysis worst_case_sm(const CrossbarConfig& cfg, ImcMode mode, std::size_t pwa,
                         std::span<const SmPass> passes, std::size_t n_combos,
                         const ImcContext& ctx, const std::optional<CurrentSigma>& sigma,
                         std::uint64_t seed, unsigned workers) {
    if (passes.empty() || n_combos == 0) throw ParameterError("worst_case_sm needs combos");
    cfg.validate();
    const std::size_t cap = passes.size() * cfg.cols;
    if (n_combos > cap) n_combos = cap;

    std::vector<OutputStateHistogram> per(passes.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex mu;
    auto dummy = make_dummy_column(cfg);
    auto work = [&] {
        for (;;) {
            const std::size_t p = next.fetch_add(1);
            if (p >= passes.size()) return;
            try {
                const auto& ps = passes[p];
                if (ps.in_prime.size() != cfg.rows || ps.weights.size() != cfg.rows * cfg.cols) {
                    throw ParameterError("SM pass does not match the array");
                }
                auto array = build_array(cfg, map_weights(mode, cfg.kind, ps.weights));
                if (sigma) apply_array_variation(array, *sigma, seed, p);
                ImcOperation op{ps.in_prime, pwa};
                const auto r = run_imc_column_pass(
                    array, cfg.kind == BitcellKind::OneT1MTJ ? &dummy : nullptr, op, mode, ctx);
                const std::size_t used = std::min(cfg.cols, n_combos - p * cfg.cols);
                const std::size_t r0 = ps.group * pwa, r1 = std::min(cfg.rows, r0 + pwa);
                std::vector<int> colw(r1 - r0);
                for (std::size_t c = 0; c < used; ++c) {
                    for (std::size_t k = r0; k < r1; ++k) colw[k - r0] = ps.weights[k * cfg.cols + c];
                    const int s = ideal_group_state(
                        cfg.kind, mode, std::span(ps.in_prime).subspan(r0, r1 - r0), colw);
                    per[p].add(s, r.i_out[ps.group][c]);
                }
            } catch (...) {
                std::lock_guard lk(mu);
                if (!err) err = std::current_exception();
                next.store(passes.size());
                return;
            }
        }
    };
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::thread> pool;
    for (unsigned i = 1; i < workers && i < passes.size(); ++i) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);

    SmAnalysis a;
    for (std::size_t p = 0; p * cfg.cols < n_combos && p < per.size(); ++p) a.histogram.merge(per[p]);
    a.combos = a.histogram.size();
    a.worst = worst_sense_margin(a.histogram);
    return a;
}

std::vector<CalibrationPoint> calibration_points(const OutputStateHistogram& h) {
    std::vector<CalibrationPoint> out;
    out.reserve(h.size());
    for (const auto& [s, v] : h.bins()) {
        for (double i : v) out.push_back({i, s});
    }
    return out;
}

int adc_bits_for_pwa(std::size_t pwa) {
    if (pwa == 0) throw ParameterError("pwa must be >= 1");
    int bits = 0;
    while ((std::size_t{1} << bits) < pwa) ++bits;
    return std::max(bits, 1);
}

IquantSweep calibrate_adc(const CrossbarConfig& cfg, ImcMode mode, std::size_t pwa,
                          const ImcContext& ctx, std::size_t n_combos, std::uint64_t seed,
                          const std::optional<CurrentSigma>& sigma, unsigned workers,
                          AdcLoss loss) {
    const auto passes = sample_sm_passes(cfg, mode, pwa, n_combos, seed);
    const auto a = worst_case_sm(cfg, mode, pwa, passes, n_combos, ctx, sigma, seed, workers);
    const auto cal = calibration_points(a.histogram);
    AdcConfig tmpl;
    tmpl.bits = adc_bits_for_pwa(pwa);
    tmpl.is_signed = signed_output(cfg.kind, mode);
    return optimize_iquant(cal, tmpl, unit_current(cfg.kind, *ctx.params, cfg.v_read), 0.7, 1.0, 64,
                           loss);
}

}  // namespace xbar
