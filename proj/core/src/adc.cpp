#include "xbar/adc.hpp"

#include <cmath>

#include "json.hpp"
#include "xbar/errors.hpp"

namespace xbar {

void AdcConfig::validate() const {
    if (bits < 1 || bits > 16) throw ParameterError("ADC bits must be in [1, 16]");
    if (!(i_quant > 0.0) || !std::isfinite(i_quant)) throw ParameterError("ADC i_quant must be > 0");
}

int quantize(double i_out, const AdcConfig& cfg) {
    const double mag = std::abs(i_out) / cfg.i_quant;
    int code = 0;
    if (mag >= 0.5) {
        // count thresholds (k + 0.5) at or below mag
        const double k = std::floor(mag - 0.5) + 1.0;
        code = k >= cfg.max_code() ? cfg.max_code() : static_cast<int>(k);
    }
    if (!cfg.is_signed) return i_out < 0.0 ? 0 : code;
    return i_out < 0.0 ? -code : code;
}

double calibration_loss(std::span<const CalibrationPoint> cal, const AdcConfig& cfg, AdcLoss loss) {
    double acc = 0.0;
    for (const auto& c : cal) {
        const double e = static_cast<double>(quantize(c.i_out, cfg) - c.ideal);
        acc += loss == AdcLoss::Mae ? std::abs(e) : e * e;
    }
    return acc / static_cast<double>(cal.size());
}

IquantSweep optimize_iquant(std::span<const CalibrationPoint> cal, const AdcConfig& tmpl,
                            double unit, double lo, double hi, int steps, AdcLoss loss) {
    if (cal.empty()) throw ParameterError("ADC calibration set is empty");
    if (!(unit > 0.0) || !(lo > 0.0) || !(hi >= lo) || steps < 1) {
        throw ParameterError("invalid i_quant sweep range");
    }
    tmpl.validate();
    IquantSweep out;
    double best_loss = 0.0;
    for (int s = 0; s < steps; ++s) {
        const double f = steps == 1 ? hi : lo + (hi - lo) * s / (steps - 1);
        AdcConfig c = tmpl;
        c.i_quant = f * unit;
        const double l = calibration_loss(cal, c, loss);
        out.curve.emplace_back(c.i_quant, l);
        if (s == 0 || l <= best_loss) {  // ascending sweep: <= favours larger i_quant
            best_loss = l;
            out.best = c;
        }
    }
    return out;
}

std::string iquant_sweep_json(const IquantSweep& s) {
    nlohmann::ordered_json j;
    j["bits"] = s.best.bits;
    j["signed"] = s.best.is_signed;
    j["i_quant"] = s.best.i_quant;
    auto c = nlohmann::ordered_json::array();
    for (auto [iq, l] : s.curve) c.push_back({{"i_quant", iq}, {"loss", l}});
    j["curve"] = c;
    return j.dump(2);
}

}  // namespace xbar
