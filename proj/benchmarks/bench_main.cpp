#include <benchmark/benchmark.h>

#include <random>

#include "xbar/crossbar.hpp"
#include "xbar/imc.hpp"
#include "xbar/lut.hpp"
#include "xbar/write_dynamics.hpp"

using namespace xbar;

namespace {

const DeviceParams& params() {
    static const DeviceParams p;
    return p;
}

const BitcellLut& lut_for(BitcellKind k) {
    static const auto make = [](BitcellKind kind) {
        const auto c = default_crossbar_config(kind, params());
        BitcellLut::BuildOptions bo;
        bo.v_max = c.v_read + 0.01;
        bo.v_wl = c.v_wl;
        return BitcellLut::build(kind, params(), bo);
    };
    static const BitcellLut s1 = make(BitcellKind::StrideI);
    static const BitcellLut s2 = make(BitcellKind::StrideII);
    return k == BitcellKind::StrideI ? s1 : s2;
}

BitcellKind kind_arg(const benchmark::State& st) {
    return st.range(0) == 1 ? BitcellKind::StrideI : BitcellKind::StrideII;
}

}  // namespace

static void BM_LutLookup(benchmark::State& st) {
    const auto& lut = lut_for(BitcellKind::StrideI);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 0.68);
    double sink = 0.0;
    for (auto _ : st) {
        const auto c = lut.lookup(CellWeight::app(), true, u(rng), u(rng));
        sink += c.i_left;
    }
    benchmark::DoNotOptimize(sink);
}
BENCHMARK(BM_LutLookup);

static void BM_BitcellSolve(benchmark::State& st) {
    const auto k = kind_arg(st);
    const auto tv = TerminalVoltages::read(default_read_voltage(k, params()), params().vdd);
    for (auto _ : st) benchmark::DoNotOptimize(solve_bitcell_dc(k, CellWeight::app(), tv, params()));
}
BENCHMARK(BM_BitcellSolve)->Arg(1)->Arg(2)->Unit(benchmark::kMicrosecond);

// one 64-row column, pwa rows asserted, LUT-backed cells
static void BM_SolveColumn(benchmark::State& st) {
    const auto k = BitcellKind::StrideI;
    const auto c = default_crossbar_config(k, params());
    std::mt19937_64 rng(2);
    std::vector<int> w(c.rows * c.cols);
    for (auto& x : w) x = static_cast<int>(rng() & 1u);
    const auto a = build_array(c, map_weights(ImcMode::And, k, w));
    std::vector<std::uint8_t> wl(c.rows, 0);
    for (std::int64_t r = 0; r < st.range(0); ++r) wl[static_cast<std::size_t>(r)] = 1;
    for (auto _ : st) benchmark::DoNotOptimize(solve_column(a, 0, wl, params(), &lut_for(k)));
}
BENCHMARK(BM_SolveColumn)->Arg(8)->Arg(16)->Unit(benchmark::kMicrosecond);

static void BM_LlgsStep(benchmark::State& st) {
    Macrospin m(params(), MtjState::P, 2.0);
    const double i = 2.0 * critical_current(params());
    for (auto _ : st) {
        m.step(i, 1e-3);
        benchmark::DoNotOptimize(m.m());
    }
}
BENCHMARK(BM_LlgsStep);
BENCHMARK_MAIN();
