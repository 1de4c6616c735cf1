#include <cmath>

#include "doctest.h"
#include "xbar/adc.hpp"
#include "xbar/errors.hpp"
#include "xbar/robustness.hpp"

using namespace xbar;

TEST_CASE("quantize: on-grid, zero and saturation") {
    AdcConfig c;
    c.bits = 3;
    c.i_quant = 2e-6;
    CHECK(quantize(3 * 2e-6, c) == 3);
    CHECK(quantize(0.0, c) == 0);
    CHECK(quantize(0.49 * 2e-6, c) == 0);
    CHECK(quantize(0.51 * 2e-6, c) == 1);
    CHECK(quantize(100 * 2e-6, c) == c.max_code());
    CHECK(quantize(-3 * 2e-6, c) == 0);
    c.is_signed = true;
    CHECK(quantize(-3 * 2e-6, c) == -3);
    CHECK(quantize(-100 * 2e-6, c) == -c.max_code());
    CHECK(c.max_code() == 8);
}

TEST_CASE("ADC config validation") {
    AdcConfig c;
    c.bits = 0;
    CHECK_THROWS_AS(c.validate(), ParameterError);
    c = {};
    c.i_quant = 0.0;
    CHECK_THROWS_AS(c.validate(), ParameterError);
}

TEST_CASE("optimize_iquant: ideal calibration lands on the unit current") {
    const double unit = 20e-6;
    std::vector<CalibrationPoint> cal;
    for (int k = 0; k <= 8; ++k) cal.push_back({k * unit, k});
    AdcConfig t;
    t.bits = 3;
    const auto s = optimize_iquant(cal, t, unit);
    CHECK(s.best.i_quant == doctest::Approx(unit).epsilon(1.0 / 63));
    CHECK(calibration_loss(cal, s.best) == 0.0);
    CHECK(s.curve.size() == 64);
}

TEST_CASE("optimize_iquant: compressed (IR-dropped) outputs favour a lower level") {
    const double unit = 20e-6;
    std::vector<CalibrationPoint> cal;
    for (int k = 0; k <= 8; ++k) cal.push_back({k * unit * (1.0 - 0.03 * k), k});
    AdcConfig t;
    t.bits = 3;
    const auto s = optimize_iquant(cal, t, unit);
    CHECK(s.best.i_quant < unit);
    CHECK(calibration_loss(cal, s.best) < calibration_loss(cal, AdcConfig{3, unit, false}));
}

TEST_CASE("optimize_iquant: single point is exact for every level bracketing it") {
    const double unit = 10e-6;
    const std::vector<CalibrationPoint> cal{{2.5 * 0.85 * unit, 2}};  // i_out / k = 1.0625 unit
    AdcConfig t;
    t.bits = 3;
    const auto s = optimize_iquant(cal, t, unit, 0.7, 1.0, 64, AdcLoss::Mse);
    for (auto [iq, l] : s.curve) {
        const double x = cal[0].i_out / iq;
        CHECK((l == 0.0) == (x >= 1.5 && x < 2.5));
    }
    CHECK(calibration_loss(cal, s.best, AdcLoss::Mse) == 0.0);
}

TEST_CASE("optimize_iquant preconditions") {
    AdcConfig t;
    CHECK_THROWS_AS(optimize_iquant({}, t, 1e-6), ParameterError);
    const std::vector<CalibrationPoint> cal{{1e-6, 1}};
    CHECK_THROWS_AS(optimize_iquant(cal, t, 1e-6, 1.0, 0.5), ParameterError);
    CHECK_THROWS_AS(optimize_iquant(cal, t, 0.0), ParameterError);
    CHECK(iquant_sweep_json(optimize_iquant(cal, t, 1e-6)).find("\"curve\"") != std::string::npos);
}

TEST_CASE("calibrate_adc on a non-ideal STRIDe array picks i_quant below the unit current") {
    const DeviceParams p;
    auto c = default_crossbar_config(BitcellKind::StrideI, p);
    ImcContext ctx;
    ctx.params = &p;
    BitcellLut::BuildOptions bo;
    bo.v_max = c.v_read + 0.01;
    const auto lut = BitcellLut::build(c.kind, p, bo);
    ctx.lut = &lut;
    const auto s = calibrate_adc(c, ImcMode::And, 16, ctx, 640, 3);
    CHECK(s.best.bits == 4);
    CHECK(s.best.i_quant < unit_current(c.kind, p, c.v_read));
}
