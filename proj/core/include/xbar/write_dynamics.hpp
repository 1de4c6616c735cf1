#pragma once

#include <array>
#include <vector>

#include "xbar/device.hpp"

namespace xbar {

using Vec3 = std::array<double, 3>;

// Free-layer geometry and anisotropy derived from DeviceParams (CGS units).
double free_layer_volume_cm3(const DeviceParams& p);
double anisotropy_field_oe(const DeviceParams& p);
// K_u * V / (k_B * T), the barrier implied by the card (compare with
// DeviceParams::energy_barrier_kt).
double computed_energy_barrier_kt(const DeviceParams& p);

// Macrospin Slonczewski threshold, 2 e alpha (2 K_u V) / (hbar eta), with
// eta = spin_polarization. Same magnitude for both switching directions.
double critical_current(const DeviceParams& p);

// Spin-polarization value that makes critical_current() equal `i_c`.
double polarization_for_critical_current(const DeviceParams& p, double i_c);

struct TrajectoryPoint {
    double t_ns;
    Vec3 m;
};

struct WriteResult {
    bool switched = false;
    double latency_ns = 0.0;  // m_z crossing of the switching threshold
    double energy_j = 0.0;    // only filled by circuit-driven writes
    std::vector<TrajectoryPoint> trajectory;
};

struct LlgsOptions {
    double horizon_ns = 100.0;
    double dt_ns = 1e-3;
    double tilt_deg = 2.0;         // initial angle off the easy axis
    double switch_threshold = 0.9;  // switched once m_z * initial_sign < -threshold
    int record_every = 0;          // trajectory sampling stride in steps (0: none)
};

// Integrates LLGS for a constant current. Positive current flows from the
// pinned layer into the free layer and anti-parallelizes.
WriteResult llgs_simulate(const DeviceParams& p, double current, MtjState initial,
                          const LlgsOptions& opt = {});

// Smallest |current| that switches `initial` within opt.horizon_ns, by
// bisection on llgs_simulate over [lo, hi] * critical_current(p).
double dynamic_critical_current(const DeviceParams& p, MtjState initial, const LlgsOptions& opt,
                                double rel_tol = 1e-3, double lo = 0.5, double hi = 3.0);

// Single-spin integrator with a current that may change between steps.
class Macrospin {
public:
    Macrospin(const DeviceParams& p, MtjState initial, double tilt_deg);

    void step(double current, double dt_ns);
    const Vec3& m() const { return m_; }
    // (1 - cos theta) / 2 with respect to the pinned layer (+z)
    double ap_fraction() const;
    double initial_sign() const { return sign0_; }
    // Anisotropy energy density in units of K_u: 1 - m_z^2.
    double anisotropy_energy() const { return 1.0 - m_[2] * m_[2]; }
    // |m| - 1 before the last renormalization.
    double last_norm_drift() const { return drift_; }

private:
    Vec3 rhs(const Vec3& m, double a_j) const;

    double gamma_;   // rad / (ns Oe) divided by (1 + alpha^2)
    double alpha_;
    double hk_;      // Oe
    double aj_per_amp_;  // Oe / A
    double sign0_;
    double drift_ = 0.0;
    Vec3 m_;
};

// Write biasing. STRIDe-II writes P in one cycle and AP in the other with
// different supply levels; the other kinds use `v_write` on the selected
// lines and the write-enabled gate.
// Energy accounting over the data patterns (programs):
//   WorstCase     supply energy over the class pulses of the slowest program
//   FixedPulse    same, averaged over all programs
//   UntilSwitched supply energy until each program has switched, averaged
enum class WriteEnergy { WorstCase, FixedPulse, UntilSwitched };

struct WriteScheme {
    double v_write = 1.45;
    double v_write_p = 1.55;   // STRIDe-II cycle writing P
    double v_write_ap = 1.2;   // STRIDe-II cycle writing AP
    LlgsOptions llgs{.horizon_ns = 1000.0};
    WriteEnergy energy = WriteEnergy::WorstCase;
};

struct WriteCost {
    double latency_ns = 0.0;  // pulse width(s) needed by the slowest data pattern
    double energy_j = 0.0;    // see WriteEnergy
    bool switched = false;
};

struct WriteComparison {
    WriteCost cost;
    WriteCost reference;      // 1T-1MTJ at the same scheme
    double latency_ratio = 0.0;
    double energy_ratio = 0.0;
};

// Transient write of one bitcell: the netlist is solved at every step with
// MTJ conductances following the free-layer angles. The pulse for each
// cycle is the worst switching time over both data patterns; energy is the
// supply energy over that pulse, averaged over the patterns.
WriteCost write_cycle_cost(BitcellKind kind, const WriteScheme& scheme, const DeviceParams& p);

WriteComparison compare_write_cost(BitcellKind kind, const WriteScheme& scheme,
                                   const DeviceParams& p);

}  // namespace xbar
