#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xbar/device.hpp"

namespace xbar {

// Canonical JSON text of a parameter card and its 64-bit FNV-1a digest.
std::string device_params_json(const DeviceParams& p);
std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t v);
std::string params_hash(const DeviceParams& p);

struct LutCurrents {
    double i_left = 0.0;
    double i_right = 0.0;
};

// Pre-characterized bitcell currents over (v_bl, v_blb) with SL/SLB at 0 V,
// one table per (stored weight, WL on/off). Single-MTJ kinds collapse the
// BLB axis to one point.
class BitcellLut {
public:
    struct BuildOptions {
        double v_max = 0.7;
        double step = 2e-3;
        double v_wl = 1.2;
        unsigned workers = 0;  // 0: hardware concurrency
    };

    static BitcellLut build(BitcellKind kind, const DeviceParams& params,
                            const BuildOptions& opt);

    LutCurrents lookup(CellWeight w, bool wl_on, double v_bl, double v_blb) const;

    BitcellKind kind() const { return kind_; }
    const std::string& params_hash() const { return hash_; }
    double step() const { return step_; }
    double v_max() const { return step_ * static_cast<double>(nx_ - 1); }
    double v_wl() const { return v_wl_; }
    std::size_t nx() const { return nx_; }
    std::size_t ny() const { return ny_; }

    // Binary layout: "XBARLUT1\n", u64 header length, JSON header, then the
    // tables as little-endian float64 in header order, row-major (v_bl major).
    void save(const std::filesystem::path& path) const;
    static BitcellLut load(const std::filesystem::path& path);

    bool operator==(const BitcellLut&) const = default;

private:
    static std::size_t table_index(CellWeight w, bool wl_on) {
        return (w.left == MtjState::P ? 0u : 2u) + (wl_on ? 1u : 0u);
    }

    BitcellKind kind_ = BitcellKind::StrideI;
    std::string hash_;
    double step_ = 2e-3;
    double v_wl_ = 1.2;
    std::size_t nx_ = 0, ny_ = 0;
    // [table][2 * (ix * ny + iy) + {0: left, 1: right}]
    std::array<std::vector<double>, 4> tables_;
};

}  // namespace xbar
