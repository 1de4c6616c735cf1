#include "xbar/circuit.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>

#include "xbar/errors.hpp"
#include "xbar/mtj.hpp"

namespace xbar {
namespace {

constexpr std::size_t kDenseLimit = 48;

}  // namespace

Circuit::NodeId Circuit::add_fixed(double volts) {
    fixed_.push_back(true);
    value_.push_back(volts);
    unknown_index_.push_back(-1);
    return static_cast<NodeId>(fixed_.size() - 1);
}

Circuit::NodeId Circuit::add_node(double initial_guess) {
    fixed_.push_back(false);
    value_.push_back(initial_guess);
    unknown_index_.push_back(static_cast<int>(unknown_count_++));
    return static_cast<NodeId>(fixed_.size() - 1);
}

void Circuit::set_fixed(NodeId node, double volts) {
    if (!is_fixed(node)) throw ParameterError("set_fixed on an unknown node");
    value_[static_cast<std::size_t>(node)] = volts;
}

void Circuit::set_guess(NodeId node, double volts) {
    if (is_fixed(node)) throw ParameterError("set_guess on a fixed node");
    value_[static_cast<std::size_t>(node)] = volts;
}

std::size_t Circuit::add_resistor(NodeId a, NodeId b, double ohms) {
    if (!(ohms > 0.0) || !std::isfinite(ohms)) {
        throw ParameterError("resistor value must be positive and finite");
    }
    resistors_.push_back({a, b, 1.0 / ohms});
    return resistors_.size() - 1;
}

std::size_t Circuit::add_fet(NodeId drain, NodeId gate, NodeId source, const FetModel& model) {
    fets_.push_back({drain, gate, source, model});
    return fets_.size() - 1;
}

std::size_t Circuit::add_mtj(NodeId a, NodeId b, double r_p, double tmr, double v_half,
                             double ap_fraction) {
    if (!(r_p > 0.0) || !std::isfinite(r_p) || !(tmr >= 0.0)) {
        throw ParameterError("MTJ resistance must be positive and TMR non-negative");
    }
    mtjs_.push_back({a, b, r_p, tmr, v_half, 0.0});
    set_mtj_ap_fraction(mtjs_.size() - 1, ap_fraction);
    return mtjs_.size() - 1;
}

void Circuit::set_mtj_ap_fraction(std::size_t idx, double ap_fraction) {
    if (!(ap_fraction >= 0.0 && ap_fraction <= 1.0)) {
        throw ParameterError("MTJ AP fraction must lie in [0, 1]");
    }
    mtjs_.at(idx).w = ap_fraction;
}

double Circuit::mtj_current(std::size_t idx, std::span<const double> v) const {
    const auto& m = mtjs_.at(idx);
    return evaluate_mtj(v[static_cast<std::size_t>(m.a)] - v[static_cast<std::size_t>(m.b)], m.r_p,
                        m.tmr, m.v_half, m.w)
        .i;
}

double Circuit::resistor_current(std::size_t idx, std::span<const double> v) const {
    const auto& r = resistors_.at(idx);
    return r.g * (v[static_cast<std::size_t>(r.a)] - v[static_cast<std::size_t>(r.b)]);
}

double Circuit::fet_current(std::size_t idx, std::span<const double> v) const {
    const auto& f = fets_.at(idx);
    const double vd = v[static_cast<std::size_t>(f.d)];
    const double vg = v[static_cast<std::size_t>(f.g)];
    const double vs = v[static_cast<std::size_t>(f.s)];
    return fet_drain_current(f.model, vg - vs, vd - vs);
}

std::vector<double> Circuit::node_currents(std::span<const double> v) const {
    std::vector<double> out(fixed_.size(), 0.0);
    for (std::size_t i = 0; i < resistors_.size(); ++i) {
        const double i_ab = resistor_current(i, v);
        out[static_cast<std::size_t>(resistors_[i].a)] += i_ab;
        out[static_cast<std::size_t>(resistors_[i].b)] -= i_ab;
    }
    for (std::size_t i = 0; i < mtjs_.size(); ++i) {
        const double i_ab = mtj_current(i, v);
        out[static_cast<std::size_t>(mtjs_[i].a)] += i_ab;
        out[static_cast<std::size_t>(mtjs_[i].b)] -= i_ab;
    }
    for (std::size_t i = 0; i < fets_.size(); ++i) {
        const double id = fet_current(i, v);
        out[static_cast<std::size_t>(fets_[i].d)] += id;
        out[static_cast<std::size_t>(fets_[i].s)] -= id;
    }
    return out;
}

bool Circuit::newton(std::vector<double>& v, const Options& opt, double g_shunt,
                     std::span<const double> anchor, int& iterations,
                     double& residual) const {
    const auto n = static_cast<Eigen::Index>(unknown_count_);
    Eigen::VectorXd f(n);
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::MatrixXd dense;
    Eigen::SparseMatrix<double> sparse(n, n);
    Eigen::SparseLU<Eigen::SparseMatrix<double>> sparse_lu;
    const bool use_dense = unknown_count_ <= kDenseLimit;
    bool pattern_ready = false;

    auto ui = [this](NodeId node) { return unknown_index_[static_cast<std::size_t>(node)]; };

    for (int it = 0; it < opt.max_iterations; ++it) {
        f.setZero();
        trip.clear();
        if (use_dense) dense.setZero(n, n);
        auto add_j = [&](int r, int c, double val) {
            if (r < 0 || c < 0) return;
            if (use_dense) {
                dense(r, c) += val;
            } else {
                trip.emplace_back(r, c, val);
            }
        };

        for (const auto& r : resistors_) {
            const int ia = ui(r.a);
            const int ib = ui(r.b);
            const double i_ab =
                r.g * (v[static_cast<std::size_t>(r.a)] - v[static_cast<std::size_t>(r.b)]);
            if (ia >= 0) f[ia] += i_ab;
            if (ib >= 0) f[ib] -= i_ab;
            add_j(ia, ia, r.g);
            add_j(ia, ib, -r.g);
            add_j(ib, ib, r.g);
            add_j(ib, ia, -r.g);
        }
        for (const auto& m : mtjs_) {
            const int ia = ui(m.a);
            const int ib = ui(m.b);
            const MtjEval e = evaluate_mtj(
                v[static_cast<std::size_t>(m.a)] - v[static_cast<std::size_t>(m.b)], m.r_p, m.tmr,
                m.v_half, m.w);
            if (ia >= 0) f[ia] += e.i;
            if (ib >= 0) f[ib] -= e.i;
            add_j(ia, ia, e.g);
            add_j(ia, ib, -e.g);
            add_j(ib, ib, e.g);
            add_j(ib, ia, -e.g);
        }
        for (const auto& m : fets_) {
            const double vd = v[static_cast<std::size_t>(m.d)];
            const double vg = v[static_cast<std::size_t>(m.g)];
            const double vs = v[static_cast<std::size_t>(m.s)];
            const FetEval e = evaluate_fet(m.model, vg - vs, vd - vs);
            const int id = ui(m.d);
            const int ig = ui(m.g);
            const int is = ui(m.s);
            // d(id)/dvd = g_ds, d/dvg = g_gs, d/dvs = -(g_gs + g_ds)
            const double gs = -(e.g_gs + e.g_ds);
            if (id >= 0) {
                f[id] += e.id;
                add_j(id, id, e.g_ds);
                add_j(id, ig, e.g_gs);
                add_j(id, is, gs);
            }
            if (is >= 0) {
                f[is] -= e.id;
                add_j(is, id, -e.g_ds);
                add_j(is, ig, -e.g_gs);
                add_j(is, is, -gs);
            }
        }

        residual = f.cwiseAbs().maxCoeff();
        if (g_shunt > 0.0) {
            for (std::size_t node = 0; node < fixed_.size(); ++node) {
                const int k = unknown_index_[node];
                if (k < 0) continue;
                f[k] += g_shunt * (v[node] - anchor[node]);
                add_j(k, k, g_shunt);
            }
        }

        Eigen::VectorXd dx;
        if (use_dense) {
            Eigen::PartialPivLU<Eigen::MatrixXd> lu(dense);
            dx = lu.solve(f);
        } else {
            sparse.setFromTriplets(trip.begin(), trip.end());
            if (!pattern_ready) {
                sparse_lu.analyzePattern(sparse);
                pattern_ready = true;
            }
            sparse_lu.factorize(sparse);
            if (sparse_lu.info() != Eigen::Success) {
                throw ConvergenceError("singular nodal Jacobian", residual);
            }
            dx = sparse_lu.solve(f);
        }
        if (!dx.allFinite()) {
            throw ConvergenceError("non-finite Newton update", residual);
        }

        double max_step = dx.cwiseAbs().maxCoeff();
        const double scale = max_step > opt.max_step ? opt.max_step / max_step : 1.0;
        for (std::size_t node = 0; node < fixed_.size(); ++node) {
            const int k = unknown_index_[node];
            if (k >= 0) v[node] -= scale * dx[k];
        }
        ++iterations;

        const double plain_res = residual;
        if (g_shunt == 0.0 && plain_res < opt.residual_tol && max_step < opt.step_tol) {
            // Residual below tolerance before a negligible step: converged.
            auto nc = node_currents(v);
            double r = 0.0;
            for (std::size_t node = 0; node < fixed_.size(); ++node) {
                if (!fixed_[node]) r = std::max(r, std::abs(nc[node]));
            }
            residual = r;
            return true;
        }
        if (g_shunt > 0.0 && max_step < 1e-7) {
            return true;
        }
    }
    return false;
}

Circuit::Solution Circuit::solve(const Options& opt) const {
    Solution sol;
    sol.voltages = value_;
    if (unknown_count_ == 0) return sol;

    double residual = 0.0;
    int iterations = 0;
    if (newton(sol.voltages, opt, 0.0, {}, iterations, residual)) {
        sol.iterations = iterations;
        sol.max_residual = residual;
        return sol;
    }
    if (!opt.allow_pseudo_transient) {
        throw ConvergenceError("Newton did not converge", residual);
    }

    // Pseudo-transient continuation from the initial guess: backward-Euler
    // steps with a node shunt that is relaxed geometrically, then a final
    // undamped Newton solve.
    sol.voltages = value_;
    sol.used_fallback = true;
    Options inner = opt;
    inner.max_iterations = 60;
    double g = 1e-3;
    while (g > 1e-13) {
        std::vector<double> anchor = sol.voltages;
        int inner_it = 0;
        if (!newton(sol.voltages, inner, g, anchor, inner_it, residual)) {
            sol.voltages = anchor;
            g *= 4.0;
            if (g > 1.0) throw ConvergenceError("pseudo-transient stalled", residual);
            continue;
        }
        iterations += inner_it;
        g *= 0.3;
    }
    if (!newton(sol.voltages, opt, 0.0, {}, iterations, residual)) {
        throw ConvergenceError("Newton did not converge after continuation", residual);
    }
    sol.iterations = iterations;
    sol.max_residual = residual;
    return sol;
}

Circuit::Solution Circuit::transient_step(std::span<const double> v_prev, double c_over_dt,
                                          const Options& opt) const {
    if (v_prev.size() != fixed_.size()) throw ParameterError("transient state size mismatch");
    if (!(c_over_dt > 0.0)) throw ParameterError("transient step needs C/dt > 0");
    Solution sol;
    sol.voltages.assign(v_prev.begin(), v_prev.end());
    for (std::size_t n = 0; n < fixed_.size(); ++n) {
        if (fixed_[n]) sol.voltages[n] = value_[n];
    }
    double residual = 0.0;
    int iterations = 0;
    if (!newton(sol.voltages, opt, c_over_dt, v_prev, iterations, residual)) {
        throw ConvergenceError("transient step did not converge", residual);
    }
    sol.iterations = iterations;
    sol.max_residual = residual;
    return sol;
}

}  // namespace xbar
