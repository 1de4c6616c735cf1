#pragma once

#include <array>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "xbar/device.hpp"
#include "xbar/lut.hpp"

namespace xbar {

// Column-parallel array. Each bitline (and BLB for two-MTJ kinds) is driven
// at the top through r_driver and runs down the column with r_wire between
// adjacent rows. Wordlines are ideal. Source lines are an ideal virtual
// ground unless r_sink > 0, in which case each column's SL (and SLB) returns
// through a lumped r_sink.
struct CrossbarConfig {
    std::size_t rows = 64;
    std::size_t cols = 64;
    BitcellKind kind = BitcellKind::StrideI;
    double r_driver = 250.0;
    double r_wire = 2.4;  // per cell pitch
    double r_sink = 0.0;
    double v_read = 0.68;
    double v_wl = 1.2;

    void validate() const;
};

struct CrossbarArray {
    CrossbarConfig cfg;
    std::vector<CellWeight> weights;  // row-major rows x cols
    // Optional per-cell multiplicative factors on (i_left, i_right);
    // empty means 1.
    std::vector<std::array<double, 2>> current_scale;
    // Optional per-cell device deviations; only honoured by device-level
    // solves (dense oracle, or the iterative solver without a LUT).
    std::vector<CellVariation> device_var;

    CellWeight weight(std::size_t r, std::size_t c) const { return weights[r * cfg.cols + c]; }
};

// Validates the configuration and the weight states for the bitcell kind.
CrossbarArray build_array(const CrossbarConfig& cfg, std::span<const CellWeight> weights);

struct LineCurrents {
    double i_bl = 0.0;   // drawn from the BL driver
    double i_blb = 0.0;
    double i_sl = 0.0;   // returned through SL
    double i_slb = 0.0;
};

struct CrossbarSolution {
    std::vector<LineCurrents> columns;
    // effective cell terminal voltages, row-major
    std::vector<double> v_bl;
    std::vector<double> v_blb;
    int iterations = 0;        // worst column
    double max_update = 0.0;   // last voltage update of the worst column
};

struct SolveOptions {
    double tol = 10e-6;  // V, max voltage update
    int max_iter = 5000;
    double damping = 0.5;
    // halve the damping when the update grows, down to this floor
    double min_damping = 1.0 / 64.0;
};

// Damped fixed point between the line IR drops and the cell currents. With
// `lut` the cell currents are interpolated (requires r_sink == 0 and a LUT
// built for the same kind and parameters); otherwise every cell is solved
// at device level. Throws ConvergenceError after max_iter.
CrossbarSolution solve_iterative(const CrossbarArray& array, std::span<const std::uint8_t> wl_on,
                                 const DeviceParams& params, const BitcellLut* lut,
                                 const SolveOptions& opt = {});

// Single column of the above (the column index selects weights / factors).
LineCurrents solve_column(const CrossbarArray& array, std::size_t col,
                          std::span<const std::uint8_t> wl_on, const DeviceParams& params,
                          const BitcellLut* lut, const SolveOptions& opt = {},
                          int* iterations = nullptr);

// Whole-array nodal analysis with every cell at device level. Limited to
// rows * cols <= 256.
CrossbarSolution solve_dense_oracle(const CrossbarArray& array, std::span<const std::uint8_t> wl_on,
                                    const DeviceParams& params);

// Closed-form effective V_READ at the far end of a group of `pwa` cells
// at the bottom of an n-row column, each drawing i_high.
double worst_case_vread(double v_read, double i_high, std::size_t pwa, std::size_t n,
                        double r_driver, double r_wire);
// r_wire that makes worst_case_vread equal v_target.
double wire_resistance_for_vread(double v_target, double v_read, double i_high, std::size_t pwa,
                                 std::size_t n, double r_driver);

// Default operating point per kind. STRIDe-I reads at 0.68 V; the other
// kinds read at the V_READ giving I_H = 21 uA. Wire resistance per pitch is
// back-solved from the worst-case effective V_READ of each STRIDe kind
// (0.61 V and 0.59 V at pwa 8); the baselines share the STRIDe-II value.
constexpr double kStrideIReadVoltage = 0.68;
constexpr double kTargetReadCurrent = 21e-6;
double default_read_voltage(BitcellKind kind, const DeviceParams& params);
double default_wire_resistance(BitcellKind kind);
CrossbarConfig default_crossbar_config(BitcellKind kind, const DeviceParams& params);

void write_solution_csv(std::ostream& os, const CrossbarSolution& s);
std::string solution_json(const CrossbarSolution& s);

}  // namespace xbar
