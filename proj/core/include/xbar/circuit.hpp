#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "xbar/fet.hpp"

namespace xbar {

// Small nodal-analysis netlist of linear resistors, MTJs and FETs. Nodes are
// either fixed (ideal voltage sources to ground) or unknown; Newton's method
// solves KCL at every unknown node.
class Circuit {
public:
    using NodeId = int;

    NodeId add_fixed(double volts);
    NodeId add_node(double initial_guess = 0.0);
    void set_fixed(NodeId node, double volts);
    void set_guess(NodeId node, double volts);

    std::size_t add_resistor(NodeId a, NodeId b, double ohms);
    std::size_t add_fet(NodeId drain, NodeId gate, NodeId source, const FetModel& model);
    // MTJ between a and b; see evaluate_mtj. ap_fraction 0 is P, 1 is AP.
    std::size_t add_mtj(NodeId a, NodeId b, double r_p, double tmr, double v_half,
                        double ap_fraction);
    void set_mtj_ap_fraction(std::size_t idx, double ap_fraction);

    std::size_t node_count() const { return fixed_.size(); }
    std::size_t unknown_count() const { return unknown_count_; }
    bool is_fixed(NodeId n) const { return fixed_[static_cast<std::size_t>(n)]; }

    struct Options {
        double residual_tol = 1e-12;   // A, max |net current| at unknown nodes
        double step_tol = 1e-9;        // V
        int max_iterations = 200;
        double max_step = 0.25;        // V, per-node Newton step clamp
        bool allow_pseudo_transient = true;
    };

    struct Solution {
        std::vector<double> voltages;  // indexed by NodeId
        double max_residual = 0.0;
        int iterations = 0;
        bool used_fallback = false;
    };

    // Throws ConvergenceError when neither plain Newton nor the
    // pseudo-transient continuation reaches the tolerances.
    Solution solve(const Options& opt) const;
    Solution solve() const { return solve(Options{}); }

    // One backward-Euler step from `v_prev` with capacitance C to ground at
    // every unknown node; `c_over_dt` is C / dt in siemens.
    Solution transient_step(std::span<const double> v_prev, double c_over_dt,
                            const Options& opt) const;

    // Current a -> b through resistor `idx`, and drain -> source through FET `idx`.
    double resistor_current(std::size_t idx, std::span<const double> v) const;
    double mtj_current(std::size_t idx, std::span<const double> v) const;
    double fet_current(std::size_t idx, std::span<const double> v) const;

    // Net current leaving each node through the elements (fixed nodes included).
    std::vector<double> node_currents(std::span<const double> v) const;

private:
    struct Resistor {
        NodeId a, b;
        double g;
    };
    struct Fet {
        NodeId d, g, s;
        FetModel model;
    };
    struct Mtj {
        NodeId a, b;
        double r_p, tmr, v_half, w;
    };

    bool newton(std::vector<double>& v, const Options& opt, double g_shunt,
                std::span<const double> anchor, int& iterations, double& residual) const;

    std::vector<bool> fixed_;
    std::vector<double> value_;    // fixed voltage or initial guess
    std::vector<int> unknown_index_;
    std::size_t unknown_count_ = 0;
    std::vector<Resistor> resistors_;
    std::vector<Fet> fets_;
    std::vector<Mtj> mtjs_;
};

}  // namespace xbar
