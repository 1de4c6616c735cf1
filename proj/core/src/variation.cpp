#include "xbar/variation.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "xbar/errors.hpp"

namespace xbar {

void VariationSpec::validate() const {
    for (double v : {sigma_vth, sigma_tox_fraction, sigma_diameter_fraction}) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ParameterError("variation sigmas must be >= 0");
    }
    if (!(tox_decay_nm > 0.0)) throw ParameterError("tox_decay_nm must be > 0");
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

double gauss(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    return n(rng);
}

constexpr int kMaxRetries = 100;

// R_P multiplier for a lateral scale and an oxide-thickness offset.
double rp_scale(double lateral, double dtox_nm, double decay_nm) {
    return std::exp(dtox_nm / decay_nm) / (lateral * lateral);
}

}  // namespace

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream) {
    const std::uint64_t a = splitmix(seed ^ splitmix(stream + 0x632be59bd9b4e019ull));
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

DeviceParams sample_device_params(const DeviceParams& base, const VariationSpec& spec,
                                  std::mt19937_64& rng) {
    spec.validate();
    for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
        DeviceParams p = base;
        const double dvth = spec.sigma_vth * gauss(rng);
        const double ftox = 1.0 + spec.sigma_tox_fraction * gauss(rng);
        const double fd = 1.0 + spec.sigma_diameter_fraction * gauss(rng);
        p.vth = base.vth + dvth;
        p.tox_nm = base.tox_nm * ftox;
        p.fl_width_nm = base.fl_width_nm * fd;
        p.fl_length_nm = base.fl_length_nm * fd;
        if (!(p.vth > 0.0) || !(p.tox_nm > 0.0) || !(fd > 0.0) || !(p.vth < p.vdd)) continue;
        p.r_p_ohm = base.r_p_ohm * rp_scale(fd, p.tox_nm - base.tox_nm, spec.tox_decay_nm);
        return p;
    }
    throw ParameterError("variation sampling kept producing nonphysical parameters");
}

CellVariation sample_cell_variation(const DeviceParams& base, const VariationSpec& spec,
                                    std::mt19937_64& rng) {
    spec.validate();
    CellVariation v;
    for (auto& s : v.r_p_scale) {
        int attempt = 0;
        for (; attempt < kMaxRetries; ++attempt) {
            const double fd = 1.0 + spec.sigma_diameter_fraction * gauss(rng);
            const double dt = base.tox_nm * spec.sigma_tox_fraction * gauss(rng);
            if (fd > 0.0 && base.tox_nm + dt > 0.0) {
                s = rp_scale(fd, dt, spec.tox_decay_nm);
                break;
            }
        }
        if (attempt == kMaxRetries) throw ParameterError("variation sampling kept producing nonphysical MTJs");
    }
    for (auto& d : v.vth_shift) {
        int attempt = 0;
        for (; attempt < kMaxRetries; ++attempt) {
            d = spec.sigma_vth * gauss(rng);
            if (base.vth + d > 0.0 && base.vth + d < base.vdd) break;
        }
        if (attempt == kMaxRetries) throw ParameterError("variation sampling kept producing nonphysical V_th");
    }
    return v;
}

McResult bitcell_mc(BitcellKind kind, CellWeight weight, const TerminalVoltages& tv,
                    const DeviceParams& base, const VariationSpec& spec, std::size_t n_trials,
                    std::uint64_t seed, unsigned workers) {
    if (n_trials < 2) throw ParameterError("bitcell_mc needs at least 2 trials");
    base.validate();
    spec.validate();
    validate_weight(kind, weight);
    std::vector<std::optional<std::array<double, 2>>> res(n_trials);
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex mu;
    auto work = [&] {
        for (;;) {
            const std::size_t t = next.fetch_add(1);
            if (t >= n_trials) return;
            try {
                auto rng = substream(seed, t);
                const auto var = sample_cell_variation(base, spec, rng);
                try {
                    const auto b = solve_bitcell_dc(kind, weight, tv, base, var);
                    res[t] = std::array<double, 2>{b.i_left, b.i_right};
                } catch (const ConvergenceError&) {
                    // counted below
                }
            } catch (...) {
                std::lock_guard lk(mu);
                if (!err) err = std::current_exception();
                next.store(n_trials);
                return;
            }
        }
    };
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::thread> pool;
    for (unsigned i = 1; i < workers && i < n_trials; ++i) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);

    McResult out;
    out.trials = n_trials;
    for (const auto& r : res) {
        if (r) {
            out.samples.push_back(*r);
        } else {
            ++out.failures;
        }
    }
    if (out.failures * 100 > n_trials) {
        throw ConvergenceError("bitcell Monte Carlo: " + std::to_string(out.failures) + " of " +
                                   std::to_string(n_trials) + " solves failed (limit 1%)",
                               static_cast<double>(out.failures));
    }
    if (out.samples.size() < 2) throw ConvergenceError("bitcell Monte Carlo: too few successful trials", 0.0);
    auto stats = [&](int k) {
        BranchStats s;
        double sum = 0.0;
        for (const auto& x : out.samples) sum += x[static_cast<std::size_t>(k)];
        const double n = static_cast<double>(out.samples.size());
        s.mean = sum / n;
        double ss = 0.0;
        for (const auto& x : out.samples) {
            const double d = x[static_cast<std::size_t>(k)] - s.mean;
            ss += d * d;
        }
        s.sigma = std::sqrt(ss / (n - 1.0));
        s.sigma_fraction = s.mean != 0.0 ? s.sigma / std::abs(s.mean) : 0.0;
        return s;
    };
    out.left = stats(0);
    out.right = stats(1);
    return out;
}

double apply_current_variation(double i_nominal, double sigma_fraction, std::mt19937_64& rng) {
    if (!(sigma_fraction >= 0.0)) throw ParameterError("current sigma must be >= 0");
    if (sigma_fraction == 0.0 || i_nominal == 0.0) return i_nominal;
    return i_nominal * (1.0 + sigma_fraction * gauss(rng));
}

CurrentSigma extract_current_sigma(BitcellKind kind, const DeviceParams& base,
                                   const VariationSpec& spec, double v_read, std::size_t n_trials,
                                   std::uint64_t seed, unsigned workers) {
    const auto tv = TerminalVoltages::read(v_read, base.vdd);
    CurrentSigma s;
    if (kind == BitcellKind::OneT1MTJ) {
        s.p = bitcell_mc(kind, CellWeight::single(MtjState::P), tv, base, spec, n_trials, seed, workers)
                  .left.sigma_fraction;
        s.ap = bitcell_mc(kind, CellWeight::single(MtjState::AP), tv, base, spec, n_trials, seed + 1,
                          workers)
                   .left.sigma_fraction;
        return s;
    }
    const auto r = bitcell_mc(kind, CellWeight::pap(), tv, base, spec, n_trials, seed, workers);
    s.p = r.left.sigma_fraction;
    s.ap = r.right.sigma_fraction;
    return s;
}

void apply_array_variation(CrossbarArray& array, const CurrentSigma& sigma, std::uint64_t seed,
                           std::uint64_t stream) {
    auto rng = substream(seed, stream);
    array.current_scale.resize(array.weights.size());
    for (std::size_t k = 0; k < array.weights.size(); ++k) {
        const auto w = array.weights[k];
        array.current_scale[k][0] = 1.0 + sigma.of(w.left) * gauss(rng);
        array.current_scale[k][1] = 1.0 + sigma.of(w.right) * gauss(rng);
    }
}

}  // namespace xbar
