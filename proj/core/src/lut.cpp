#include "xbar/lut.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <atomic>
#include <fstream>
#include <mutex>
#include <thread>

#include "json.hpp"
#include "xbar/errors.hpp"

namespace xbar {

using ojson = nlohmann::ordered_json;

std::string device_params_json(const DeviceParams& p) {
    ojson j = ojson::object();
    for (const auto& f : device_param_fields()) j[f.name] = p.*(f.member);
    return j.dump();
}

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    static const char* d = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = d[v & 0xf];
    return s;
}

std::string params_hash(const DeviceParams& p) { return hex64(fnv1a64(device_params_json(p))); }

namespace {

constexpr char kMagic[] = "XBARLUT1\n";

void put_le(std::ostream& f, std::uint64_t u) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((u >> (8 * i)) & 0xff);
    f.write(b, 8);
}

std::uint64_t get_le(std::istream& f) {
    unsigned char b[8] = {};
    f.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t u = 0;
    for (int i = 7; i >= 0; --i) u = (u << 8) | b[i];
    return u;
}

std::vector<CellWeight> lut_weights(BitcellKind kind) {
    if (is_two_mtj(kind)) return {CellWeight::pap(), CellWeight::app()};
    return {CellWeight::single(MtjState::P), CellWeight::single(MtjState::AP)};
}

}  // namespace

BitcellLut BitcellLut::build(BitcellKind kind, const DeviceParams& params,
                             const BuildOptions& opt) {
    params.validate();
    if (!(opt.step > 0.0) || !(opt.v_max > 0.0)) {
        throw ParameterError("LUT step and v_max must be positive");
    }
    if (opt.v_max > params.vdd) throw ParameterError("LUT v_max exceeds vdd");
    BitcellLut lut;
    lut.kind_ = kind;
    lut.hash_ = xbar::params_hash(params);
    lut.step_ = opt.step;
    lut.v_wl_ = opt.v_wl;
    lut.nx_ = static_cast<std::size_t>(std::ceil(opt.v_max / opt.step - 1e-9)) + 1;
    lut.ny_ = is_two_mtj(kind) ? lut.nx_ : 1;
    const std::size_t nx = lut.nx_, ny = lut.ny_;
    const double h = opt.step;

    struct Job {
        CellWeight w;
        bool wl_on;
        std::size_t row;
    };
    std::vector<Job> jobs;
    for (auto w : lut_weights(kind)) {
        for (bool on : {false, true}) {
            lut.tables_[table_index(w, on)].assign(2 * nx * ny, 0.0);
            for (std::size_t ix = 0; ix < nx; ++ix) jobs.push_back({w, on, ix});
        }
    }

    // Each row starts from the ramped solve on the diagonal (v_bl == v_blb),
    // which is the physically reached latch branch, then walks outward.
    auto run_row = [&](const Job& job) {
        auto& tab = lut.tables_[table_index(job.w, job.wl_on)];
        const double vbl = h * static_cast<double>(job.row);
        const double vwl = job.wl_on ? opt.v_wl : 0.0;
        auto put = [&](std::size_t iy, const BranchCurrents& b) {
            const std::size_t k = 2 * (job.row * ny + iy);
            tab[k] = b.i_left;
            tab[k + 1] = b.i_right;
        };
        TerminalVoltages tv;
        tv.v_bl = vbl;
        tv.v_wl = vwl;
        if (ny == 1) {
            put(0, solve_bitcell_dc(kind, job.w, tv, params));
            return;
        }
        const std::size_t d = job.row;
        std::vector<double> guess, out;
        tv.v_blb = vbl;
        put(d, solve_bitcell_dc(kind, job.w, tv, params, {}, &guess));
        const std::vector<double> diag = guess;
        for (std::size_t iy = d + 1; iy < ny; ++iy) {
            tv.v_blb = h * static_cast<double>(iy);
            put(iy, solve_bitcell_dc_warm(kind, job.w, tv, params, {}, guess, out));
            guess.swap(out);
        }
        guess = diag;
        for (std::size_t iy = d; iy-- > 0;) {
            tv.v_blb = h * static_cast<double>(iy);
            put(iy, solve_bitcell_dc_warm(kind, job.w, tv, params, {}, guess, out));
            guess.swap(out);
        }
    };

    unsigned workers = opt.workers ? opt.workers : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, static_cast<unsigned>(jobs.size()));
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    auto worker = [&] {
        for (;;) {
            const std::size_t j = next.fetch_add(1);
            if (j >= jobs.size()) return;
            try {
                run_row(jobs[j]);
            } catch (...) {
                std::lock_guard lk(err_mu);
                if (!err) err = std::current_exception();
                next.store(jobs.size());
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned i = 1; i < workers; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
    return lut;
}

LutCurrents BitcellLut::lookup(CellWeight w, bool wl_on, double v_bl, double v_blb) const {
    const auto& tab = tables_[table_index(w, wl_on)];
    const double lim = v_max() + 1e-12;
    if (!(v_bl >= -1e-12 && v_bl <= lim)) {
        throw ParameterError("LUT lookup: v_bl outside the characterized range");
    }
    auto locate = [&](double v, std::size_t n, std::size_t& i, double& f) {
        const double x = std::clamp(v / step_, 0.0, static_cast<double>(n - 1));
        i = std::min(static_cast<std::size_t>(x), n - 2);
        f = x - static_cast<double>(i);
    };
    std::size_t ix;
    double fx;
    locate(v_bl, nx_, ix, fx);
    if (ny_ == 1) {
        const double* a = &tab[2 * ix];
        const double* b = &tab[2 * (ix + 1)];
        return {a[0] + fx * (b[0] - a[0]), a[1] + fx * (b[1] - a[1])};
    }
    if (!(v_blb >= -1e-12 && v_blb <= lim)) {
        throw ParameterError("LUT lookup: v_blb outside the characterized range");
    }
    std::size_t iy;
    double fy;
    locate(v_blb, ny_, iy, fy);
    const double* p00 = &tab[2 * (ix * ny_ + iy)];
    const double* p01 = p00 + 2;
    const double* p10 = p00 + 2 * ny_;
    const double* p11 = p10 + 2;
    LutCurrents r;
    for (int k = 0; k < 2; ++k) {
        const double lo = p00[k] + fy * (p01[k] - p00[k]);
        const double hi = p10[k] + fy * (p11[k] - p10[k]);
        (k == 0 ? r.i_left : r.i_right) = lo + fx * (hi - lo);
    }
    return r;
}

void BitcellLut::save(const std::filesystem::path& path) const {
    ojson hdr;
    hdr["format"] = "xbar-bitcell-lut";
    hdr["version"] = 1;
    hdr["kind"] = std::string(to_string(kind_));
    hdr["params_hash"] = hash_;
    hdr["v_wl"] = v_wl_;
    hdr["axes"] = {{"v_bl", {{"start", 0.0}, {"step", step_}, {"count", nx_}}},
                   {"v_blb", {{"start", 0.0}, {"step", step_}, {"count", ny_}}}};
    hdr["layout"] = "row-major v_bl x v_blb x {i_left, i_right}, float64 little-endian";
    ojson tabs = ojson::array();
    for (auto w : lut_weights(kind_)) {
        for (bool on : {false, true}) {
            tabs.push_back({{"weight", std::string(to_string(w.left)) +
                                           (is_two_mtj(kind_) ? "," + std::string(to_string(w.right)) : "")},
                            {"wl_on", on},
                            {"index", table_index(w, on)}});
        }
    }
    hdr["tables"] = tabs;
    const std::string h = hdr.dump();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
    f.write(kMagic, sizeof(kMagic) - 1);
    put_le(f, h.size());
    f.write(h.data(), static_cast<std::streamsize>(h.size()));
    for (const auto& t : tabs) {
        const auto& tab = tables_[t["index"].get<std::size_t>()];
        for (double v : tab) put_le(f, std::bit_cast<std::uint64_t>(v));
    }
    if (!f) throw IoError("write failed for '" + path.string() + "'");
}

BitcellLut BitcellLut::load(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path.string() + "'");
    char magic[sizeof(kMagic) - 1];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
        throw IoError("'" + path.string() + "' is not a bitcell LUT file");
    }
    const std::uint64_t len = get_le(f);
    if (!f || len > (1u << 24)) throw IoError("corrupt LUT header in '" + path.string() + "'");
    std::string h(len, '\0');
    f.read(h.data(), static_cast<std::streamsize>(len));
    BitcellLut lut;
    try {
        const auto hdr = ojson::parse(h);
        lut.kind_ = parse_kind(hdr.at("kind").get<std::string>());
        lut.hash_ = hdr.at("params_hash").get<std::string>();
        lut.v_wl_ = hdr.at("v_wl").get<double>();
        lut.step_ = hdr.at("axes").at("v_bl").at("step").get<double>();
        lut.nx_ = hdr.at("axes").at("v_bl").at("count").get<std::size_t>();
        lut.ny_ = hdr.at("axes").at("v_blb").at("count").get<std::size_t>();
        if (lut.nx_ < 2 || lut.ny_ < 1 || lut.nx_ > 100000 || lut.ny_ > 100000) {
            throw IoError("bad LUT axes");
        }
        for (const auto& t : hdr.at("tables")) {
            const auto idx = t.at("index").get<std::size_t>();
            if (idx >= 4) throw IoError("bad LUT table index");
            auto& tab = lut.tables_[idx];
            tab.resize(2 * lut.nx_ * lut.ny_);
            for (double& v : tab) v = std::bit_cast<double>(get_le(f));
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError("corrupt LUT header in '" + path.string() + "': " + e.what());
    } catch (const ParameterError& e) {
        throw IoError(std::string("corrupt LUT header: ") + e.what());
    }
    if (!f) throw IoError("truncated LUT file '" + path.string() + "'");
    return lut;
}

}  // namespace xbar
