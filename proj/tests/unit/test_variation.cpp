#include <cmath>
#include <random>

#include "doctest.h"
#include "xbar/errors.hpp"
#include "xbar/variation.hpp"

using namespace xbar;

namespace {
VariationSpec zero_spec() {
    VariationSpec s;
    s.sigma_vth = 0.0;
    s.sigma_tox_fraction = 0.0;
    s.sigma_diameter_fraction = 0.0;
    return s;
}
}  // namespace

TEST_CASE("zero sigmas reproduce the base card") {
    const DeviceParams base;
    auto rng = substream(1, 0);
    const auto d = sample_device_params(base, zero_spec(), rng);
    CHECK(d.vth == base.vth);
    CHECK(d.r_p_ohm == doctest::Approx(base.r_p_ohm).epsilon(1e-12));
    CHECK(d.tox_nm == base.tox_nm);
    const auto cv = sample_cell_variation(base, zero_spec(), rng);
    CHECK(cv.r_p_scale[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cv.vth_shift[2] == 0.0);
}

TEST_CASE("sampled V_th spread matches sigma_vth") {
    const DeviceParams base;
    VariationSpec s = zero_spec();
    s.sigma_vth = 0.025;
    auto rng = substream(7, 3);
    double sum = 0.0, sq = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const double v = sample_device_params(base, s, rng).vth;
        sum += v;
        sq += v * v;
    }
    const double mean = sum / n;
    const double sd = std::sqrt((sq - n * mean * mean) / (n - 1));
    CHECK(mean == doctest::Approx(base.vth).epsilon(0.01));
    CHECK(sd == doctest::Approx(0.025).epsilon(0.03));
}

TEST_CASE("thinner oxide and larger area both lower R_P") {
    const DeviceParams base;
    VariationSpec s = zero_spec();
    s.sigma_tox_fraction = 0.015;
    s.sigma_diameter_fraction = 0.05;
    auto rng = substream(2, 0);
    int checked = 0;
    for (int i = 0; i < 200; ++i) {
        const auto d = sample_device_params(base, s, rng);
        const double area = d.fl_width_nm * d.fl_length_nm / (base.fl_width_nm * base.fl_length_nm);
        const double expect = base.r_p_ohm * std::exp((d.tox_nm - base.tox_nm) / s.tox_decay_nm) / area;
        CHECK(d.r_p_ohm == doctest::Approx(expect).epsilon(1e-9));
        ++checked;
    }
    CHECK(checked == 200);
}

TEST_CASE("substreams are reproducible and distinct") {
    auto a = substream(5, 1), b = substream(5, 1), c = substream(5, 2), d = substream(6, 1);
    const auto x = a();
    CHECK(x == b());
    CHECK(x != c());
    CHECK(x != d());
}

TEST_CASE("bitcell_mc: zero spec gives zero spread; determinism across worker counts") {
    const DeviceParams p;
    const auto tv = TerminalVoltages::read(0.68, 1.2);
    const auto z = bitcell_mc(BitcellKind::StrideI, CellWeight::pap(), tv, p, zero_spec(), 8, 1);
    CHECK(z.left.sigma_fraction == doctest::Approx(0.0).scale(1.0));
    CHECK(z.right.sigma_fraction < 1e-9);
    CHECK(z.failures == 0);

    const VariationSpec s;
    const auto a = bitcell_mc(BitcellKind::StrideI, CellWeight::pap(), tv, p, s, 40, 9, 1);
    const auto b = bitcell_mc(BitcellKind::StrideI, CellWeight::pap(), tv, p, s, 40, 9, 3);
    CHECK(a.samples == b.samples);
    CHECK(a.right.mean == b.right.mean);
    CHECK(a.samples.size() == 40);
    CHECK_THROWS_AS(bitcell_mc(BitcellKind::StrideI, CellWeight::pap(), tv, p, s, 1, 9), ParameterError);
}

TEST_CASE("STRIDe OFF branch spreads far more than its ON branch") {
    const DeviceParams p;
    const auto r = bitcell_mc(BitcellKind::StrideI, CellWeight::pap(), TerminalVoltages::read(0.68, 1.2),
                              p, VariationSpec{}, 300, 4);
    // left = P (OFF), right = AP (ON)
    CHECK(r.left.sigma_fraction > 0.5);
    CHECK(r.right.sigma_fraction < 0.2);
}

TEST_CASE("apply_current_variation") {
    auto rng = substream(1, 1);
    CHECK(apply_current_variation(5e-6, 0.0, rng) == 5e-6);
    CHECK(apply_current_variation(0.0, 0.3, rng) == 0.0);
    CHECK_THROWS_AS(apply_current_variation(1e-6, -0.1, rng), ParameterError);
    double sum = 0.0, sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double x = apply_current_variation(1.0, 0.1, rng);
        sum += x;
        sq += x * x;
    }
    const double m = sum / n;
    CHECK(m == doctest::Approx(1.0).epsilon(0.005));
    CHECK(std::sqrt(sq / n - m * m) == doctest::Approx(0.1).epsilon(0.03));
}

TEST_CASE("array variation picks sigma by stored state") {
    auto cfg = default_crossbar_config(BitcellKind::StrideI, DeviceParams{});
    cfg.rows = 8;
    cfg.cols = 8;
    auto a = build_array(cfg, std::vector<CellWeight>(64, CellWeight::pap()));
    apply_array_variation(a, CurrentSigma{0.0, 0.2}, 3, 0);
    REQUIRE(a.current_scale.size() == 64);
    bool spread = false;
    for (const auto& f : a.current_scale) {
        CHECK(f[0] == 1.0);  // P branch, sigma 0
        spread = spread || f[1] != 1.0;
    }
    CHECK(spread);
    auto b = a;
    apply_array_variation(b, CurrentSigma{0.0, 0.2}, 3, 0);
    CHECK(a.current_scale == b.current_scale);
}

TEST_CASE("variation spec validation") {
    VariationSpec s;
    s.sigma_vth = -0.1;
    CHECK_THROWS_AS(s.validate(), ParameterError);
    s = {};
    s.tox_decay_nm = 0.0;
    CHECK_THROWS_AS(s.validate(), ParameterError);
}
