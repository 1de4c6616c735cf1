#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace xbar {

enum class AdcLoss { Mae, Mse };

// Linear flash ADC: thresholds at (k + 0.5) * i_quant for k = 0 .. 2^bits - 1,
// so magnitude codes run 0 .. 2^bits. Signed mode adds a sign comparator.
struct AdcConfig {
    int bits = 3;
    double i_quant = 20e-6;
    bool is_signed = false;

    int max_code() const { return 1 << bits; }
    void validate() const;
};

int quantize(double i_out, const AdcConfig& cfg);

struct CalibrationPoint {
    double i_out;
    int ideal;
};

struct IquantSweep {
    AdcConfig best;
    std::vector<std::pair<double, double>> curve;  // (i_quant, loss)
};

// Sweeps i_quant over [lo, hi] * unit in `steps` points and keeps the
// minimum-loss value (ties go to the larger i_quant).
IquantSweep optimize_iquant(std::span<const CalibrationPoint> cal, const AdcConfig& tmpl,
                            double unit, double lo = 0.7, double hi = 1.0, int steps = 64,
                            AdcLoss loss = AdcLoss::Mae);

double calibration_loss(std::span<const CalibrationPoint> cal, const AdcConfig& cfg,
                        AdcLoss loss = AdcLoss::Mae);

std::string iquant_sweep_json(const IquantSweep& s);

}  // namespace xbar
