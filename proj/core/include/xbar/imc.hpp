#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "xbar/adc.hpp"
#include "xbar/crossbar.hpp"

namespace xbar {

enum class ImcMode { Xnor, And };

std::string_view to_string(ImcMode m);
ImcMode parse_mode(std::string_view s);

// In' = (In + 1) / 2 for In in {-1, +1}.
std::vector<std::uint8_t> encode_inputs_xnor(std::span<const int> in);

// XNOR: +1 -> (P, AP), -1 -> (AP, P). AND: 1 -> (P, AP), 0 -> (AP, P).
// 1T-1MTJ stores the high-current state (P) for weight 1 / +1.
CellWeight map_weight(ImcMode mode, BitcellKind kind, int w);
std::vector<CellWeight> map_weights(ImcMode mode, BitcellKind kind, std::span<const int> w);

// O = 2 O' - sum(W)
constexpr int postprocess_xnor(int o_prime, int sum_w) { return 2 * o_prime - sum_w; }

// Two's-complement bit planes of 4-bit signed weights, LSB plane first.
std::array<std::vector<std::uint8_t>, 4> bit_slice_weights(std::span<const int> w);

// outputs[i * weight_bits + j]: AND output for input bit i and weight plane j.
// The top weight plane carries weight -2^(weight_bits-1).
long long bit_stream_accumulate(std::span<const long long> outputs, int input_bits = 4,
                                int weight_bits = 4);

constexpr double dummy_column_correct(double i_col, double i_dummy) { return i_col - i_dummy; }

// Sensed output current of one column from its line currents. `dummy`
// (1T-1MTJ only) is the all-zero reference column under the same inputs.
double sense_output(BitcellKind kind, ImcMode mode, const LineCurrents& col,
                    const LineCurrents* dummy, double subtractor_gain = 1.0);

// Whether the ADC for this (kind, mode) resolves a sign.
bool signed_output(BitcellKind kind, ImcMode mode);

// Converts an ADC code into the group's dot-product contribution.
// n_asserted = sum(In') in the group, sum_w = sum of the group's logical
// weights (+-1 for XNOR, 0/1 for AND), group_rows = rows in the group.
int group_output(BitcellKind kind, ImcMode mode, int code, int n_asserted, int sum_w);

// Nominal single-cell output step (I_high - I_low) at the given read level.
double unit_current(BitcellKind kind, const DeviceParams& params, double v_read);

struct ImcContext {
    const DeviceParams* params = nullptr;
    const BitcellLut* lut = nullptr;  // null: device-level cell solves
    SolveOptions solve{};
    double subtractor_gain = 1.0;
};

struct ImcOperation {
    std::vector<std::uint8_t> in_prime;  // one per row
    std::size_t pwa = 8;
};

struct ImcResult {
    std::size_t groups = 0;
    std::vector<std::vector<double>> i_out;  // [group][column]
    std::vector<int> n_asserted;             // per group
};

// Runs every PWA group (rows pwa*g .. pwa*g + pwa - 1) as one cycle. A group
// with no asserted row is not executed and reports zero current.
ImcResult run_imc_column_pass(const CrossbarArray& array, const CrossbarArray* dummy,
                              const ImcOperation& op, ImcMode mode, const ImcContext& ctx);

// All-(AP) single-column reference array matching `array`'s configuration.
CrossbarArray make_dummy_column(const CrossbarConfig& cfg);

// Digitizes a pass and returns per-column dot products (sum over groups).
// `logical_weights` is row-major rows x cols in the mode's weight domain.
std::vector<long long> digitize_pass(const ImcResult& r, const CrossbarArray& array,
                                     std::span<const int> logical_weights, ImcMode mode,
                                     std::size_t pwa, const AdcConfig& adc);

}  // namespace xbar
