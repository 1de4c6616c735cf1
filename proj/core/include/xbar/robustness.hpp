#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "xbar/adc.hpp"
#include "xbar/imc.hpp"
#include "xbar/metrics.hpp"
#include "xbar/variation.hpp"

namespace xbar {

// One array cycle of the sense-margin search: a single PWA group is driven
// with `in_prime`, and every column holds its own weight pattern. Each
// column is one input/weight combination.
struct SmPass {
    std::size_t group = 0;
    std::vector<std::uint8_t> in_prime;  // all rows; zero outside the group
    std::vector<int> weights;            // logical, row-major rows x cols
};

// Seeded uniform combos: each pass draws a group, its inputs and a weight
// column per combo. The last pass may hold fewer columns (unused columns
// get random weights and are not binned).
std::vector<SmPass> sample_sm_passes(const CrossbarConfig& cfg, ImcMode mode, std::size_t pwa,
                                     std::size_t n_combos, std::uint64_t seed);

// Every input pattern against every weight pattern of a single group;
// requires rows == pwa <= 8 and gives 2^(2 pwa) combos.
std::vector<SmPass> exhaustive_sm_passes(const CrossbarConfig& cfg, ImcMode mode, std::size_t pwa);

// Ideal analog state of a group: the count of asserted "one" weights for
// unsigned outputs, (ones - zeros) over asserted rows for signed outputs.
int ideal_group_state(BitcellKind kind, ImcMode mode, std::span<const std::uint8_t> in_prime,
                      std::span<const int> column_weights);

struct SmAnalysis {
    OutputStateHistogram histogram;
    WorstSm worst;
    std::size_t combos = 0;
};

// Runs the passes on the non-ideal array. With `sigma`, every pass draws
// fresh per-cell current factors from substream(seed, pass index).
SmAnalysis worst_case_sm(const CrossbarConfig& cfg, ImcMode mode, std::size_t pwa,
                         std::span<const SmPass> passes, std::size_t n_combos,
                         const ImcContext& ctx, const std::optional<CurrentSigma>& sigma = {},
                         std::uint64_t seed = 0, unsigned workers = 1);

// Calibration pairs for the ADC from a histogram.
std::vector<CalibrationPoint> calibration_points(const OutputStateHistogram& h);

// ADC bits covering a PWA group: 3 for pwa <= 8, 4 for pwa <= 16, ...
int adc_bits_for_pwa(std::size_t pwa);

// Global reference-level calibration for one (design, scheme, pwa): the
// SM combos are run on the array and i_quant is swept over
// [lo, hi] * unit_current.
IquantSweep calibrate_adc(const CrossbarConfig& cfg, ImcMode mode, std::size_t pwa,
                          const ImcContext& ctx, std::size_t n_combos, std::uint64_t seed,
                          const std::optional<CurrentSigma>& sigma = {}, unsigned workers = 1,
                          AdcLoss loss = AdcLoss::Mae);

}  // namespace xbar
