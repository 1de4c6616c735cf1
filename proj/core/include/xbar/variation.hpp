#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "xbar/crossbar.hpp"
#include "xbar/device.hpp"

namespace xbar {

struct VariationSpec {
    double sigma_vth = 0.025;            // V, additive
    double sigma_tox_fraction = 0.015;   // of tox
    double sigma_diameter_fraction = 0.05;  // of the lateral free-layer dimensions
    double tox_decay_nm = 0.15;          // R_P ~ exp(dtox / tox_decay_nm)

    void validate() const;
};

// Independent, reproducible stream for (seed, stream id); parallel callers
// index streams by trial so results do not depend on scheduling.
std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream);

// Whole-device perturbation: V_th, t_ox and diameter, with R_P recomputed
// from area and oxide thickness.
DeviceParams sample_device_params(const DeviceParams& base, const VariationSpec& spec,
                                  std::mt19937_64& rng);

// Element-level mismatch for one bitcell: independent R_P scale per MTJ and
// V_th shift per transistor.
CellVariation sample_cell_variation(const DeviceParams& base, const VariationSpec& spec,
                                    std::mt19937_64& rng);

struct BranchStats {
    double mean = 0.0;
    double sigma = 0.0;           // absolute, A
    double sigma_fraction = 0.0;  // sigma / |mean|
};

struct McResult {
    BranchStats left, right;
    std::size_t trials = 0;
    std::size_t failures = 0;
    std::vector<std::array<double, 2>> samples;  // successful trials, in trial order
};

// Monte Carlo over element mismatch. Aborts with ConvergenceError when more
// than 1% of the trials fail to solve.
McResult bitcell_mc(BitcellKind kind, CellWeight weight, const TerminalVoltages& tv,
                    const DeviceParams& base, const VariationSpec& spec, std::size_t n_trials,
                    std::uint64_t seed, unsigned workers = 1);

// i * N(1, sigma)
double apply_current_variation(double i_nominal, double sigma_fraction, std::mt19937_64& rng);

// Fractional current sigma per stored MTJ state of a branch, for a kind.
struct CurrentSigma {
    double p = 0.0;
    double ap = 0.0;
    double of(MtjState s) const { return s == MtjState::P ? p : ap; }
};

// Extracts CurrentSigma from bitcell_mc at the read point.
CurrentSigma extract_current_sigma(BitcellKind kind, const DeviceParams& base,
                                   const VariationSpec& spec, double v_read, std::size_t n_trials,
                                   std::uint64_t seed, unsigned workers = 1);

// Fills array.current_scale with independent N(1, sigma) factors per cell
// and branch, drawn from substream(seed, stream).
void apply_array_variation(CrossbarArray& array, const CurrentSigma& sigma, std::uint64_t seed,
                           std::uint64_t stream);

}  // namespace xbar
