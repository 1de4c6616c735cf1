// Acceptance run: one PASS/FAIL line per criterion.
// Library-level checks for 1-4, the CLI pipelines (run twice) for 5-10.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "xbar/adc.hpp"
#include "xbar/crossbar.hpp"
#include "xbar/imc.hpp"
#include "xbar/lut.hpp"
#include "xbar/metrics.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace xbar;

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// ---- 1 -------------------------------------------------------------------

Verdict encoding_exactness() {
    const DeviceParams p;
    long long errors = 0, checked = 0;
    for (auto k : kAllKinds) {
        CrossbarConfig c = default_crossbar_config(k, p);
        c.rows = 8;
        c.cols = 256;  // one column per 8-bit weight pattern
        c.r_driver = 0.0;
        c.r_wire = 0.0;
        BitcellLut::BuildOptions bo;
        bo.v_max = c.v_read + 0.01;
        bo.v_wl = c.v_wl;
        const auto lut = BitcellLut::build(k, p, bo);
        ImcContext ctx;
        ctx.params = &p;
        ctx.lut = &lut;
        AdcConfig adc;
        adc.bits = 3;
        adc.i_quant = unit_current(k, p, c.v_read);
        for (auto m : {ImcMode::Xnor, ImcMode::And}) {
            std::vector<int> w(8 * 256);
            for (int col = 0; col < 256; ++col)
                for (int r = 0; r < 8; ++r) {
                    const int bit = (col >> r) & 1;
                    w[r * 256 + col] = m == ImcMode::Xnor ? 2 * bit - 1 : bit;
                }
            const auto a = build_array(c, map_weights(m, k, w));
            for (int in = 0; in < 256; ++in) {
                std::vector<std::uint8_t> wl(8);
                for (int r = 0; r < 8; ++r) wl[r] = static_cast<std::uint8_t>((in >> r) & 1);
                const auto res = run_imc_column_pass(a, nullptr, {wl, 8}, m, ctx);
                const auto got = digitize_pass(res, a, w, m, 8, adc);
                for (int col = 0; col < 256; ++col) {
                    long long ref = 0;
                    for (int r = 0; r < 8; ++r) {
                        const int x = m == ImcMode::Xnor ? 2 * wl[r] - 1 : wl[r];
                        ref += x * w[r * 256 + col];
                    }
                    errors += got[col] != ref;
                    ++checked;
                }
            }
        }
    }
    return {errors == 0, std::to_string(checked) + " outputs (4 designs x 2 schemes x 2^16), " +
                             std::to_string(errors) + " errors"};
}

// ---- 2 -------------------------------------------------------------------

Verdict solver_oracle() {
    const DeviceParams p;
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> scale(0.0, 5.0);
    double worst = 0.0;
    for (int inst = 0; inst < 200; ++inst) {
        const auto k = kAllKinds[inst % kAllKinds.size()];
        CrossbarConfig c = default_crossbar_config(k, p);
        c.rows = 1 + rng() % 64;
        c.cols = 1 + rng() % (64 / c.rows);
        c.r_driver *= scale(rng);
        c.r_wire *= scale(rng);
        std::vector<int> w(c.rows * c.cols);
        for (auto& x : w) x = static_cast<int>(rng() & 1u);
        const auto a = build_array(c, map_weights(ImcMode::And, k, w));
        std::vector<std::uint8_t> wl(c.rows);
        for (auto& x : wl) x = static_cast<std::uint8_t>(rng() & 1u);
        wl[rng() % c.rows] = 1;
        const auto it = solve_iterative(a, wl, p, nullptr);
        const auto de = solve_dense_oracle(a, wl, p);
        for (std::size_t j = 0; j < c.cols; ++j) {
            const auto& x = it.columns[j];
            const auto& y = de.columns[j];
            const double den = std::max(std::abs(y.i_bl), std::abs(y.i_blb));
            if (den == 0.0) continue;
            worst = std::max({worst, std::abs(x.i_bl - y.i_bl) / den, std::abs(x.i_blb - y.i_blb) / den});
        }
    }
    return {worst < 0.003, "max rel column-current error " + fmt("%.4f%%", 100 * worst) + " (bound 0.3%)"};
}

// ---- 3 -------------------------------------------------------------------

Verdict rdm_values() {
    const double a = rdm(75.96e-6, 21e-6);
    const double b = rdm(75.96e-6, 2.75e-9);
    const bool ok = std::abs(a - 72.35) < 0.005 && std::abs(b - 99.996) < 0.005;
    return {ok, fmt("%.4f%%", a) + " (72.35), " + fmt("%.4f%%", b) + " (99.996)"};
}

// ---- 4 -------------------------------------------------------------------

Verdict worst_case_vread_check() {
    const DeviceParams p;
    const auto c = default_crossbar_config(BitcellKind::StrideI, p);
    // back-solve from the operating point, then evaluate with the simulated I_H
    const double rw = wire_resistance_for_vread(0.61, 0.68, 22.3e-6, 8, 64, 250.0);
    const double i_h = read_currents(BitcellKind::StrideI, p, 0.68).i_high;
    const double v = worst_case_vread(0.68, i_h, 8, 64, 250.0, rw);
    const bool ok = std::abs(v - 0.61) <= 5e-3 && std::abs(rw - c.r_wire) / c.r_wire < 0.01;
    return {ok, "R_w " + fmt("%.3f Ohm", rw) + " (config " + fmt("%.3f", c.r_wire) + "), I_H " +
                    fmt("%.2f uA", i_h * 1e6) + ", V_eff " + fmt("%.4f V", v)};
}

// ---- CLI -----------------------------------------------------------------

struct Cli {
    fs::path exe, work;
    std::map<std::string, double> seconds;

    int run(const std::string& cmd, const fs::path& out, const fs::path& cfg) {
        std::ostringstream os;
        os << '"' << exe.string() << "\" " << cmd << " --config \"" << cfg.string() << "\" --seed 7 --out \""
           << out.string() << "\" --force > \"" << (work / (cmd + ".log")).string() << "\" 2>&1";
        const auto t0 = Clock::now();
        const int rc = std::system(os.str().c_str());
        seconds[cmd] = std::max(seconds[cmd], seconds_since(t0));
        return rc;
    }
};

json load_results(const fs::path& f) {
    std::ifstream in(f);
    if (!in) throw std::runtime_error("missing " + f.string());
    return json::parse(in).at("results");
}

std::string read_all(const fs::path& f) {
    std::ifstream in(f, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

const json& find(const json& arr, const std::function<bool(const json&)>& pred) {
    for (const auto& x : arr)
        if (pred(x)) return x;
    throw std::runtime_error("record not found");
}

Verdict distinguishability(const json& r) {
    const auto& t2 = find(r, [](const json& x) { return x["design"] == "2t2mtj"; });
    const double base = t2["peak_ratio"].get<double>();
    bool ok = true;
    std::string d;
    for (const char* k : {"stride1", "stride2"}) {
        const auto& x = find(r, [&](const json& y) { return y["design"] == k; });
        const double peak = x["peak_ratio"].get<double>();
        const bool interior = x["interior_maximum"].get<bool>();
        ok = ok && interior && peak >= 100.0 && peak >= 20.0 * base;
        d += std::string(k) + " peak " + fmt("%.0f", peak) + " @ " + fmt("%.2f V", x["v_at_peak"].get<double>()) +
             (interior ? " interior" : " endpoint") + ", ";
    }
    return {ok, d + "2T-2MTJ peak " + fmt("%.2f", base)};
}

Verdict sm_ordering(const json& r) {
    auto sm = [&](const char* k, const char* s, int pwa) {
        return find(r, [&](const json& x) { return x["design"] == k && x["scheme"] == s && x["pwa"] == pwa; })
            .at("worst_sm")
            .get<double>();
    };
    bool ok = true;
    std::string d;
    for (const char* k : {"stride1", "stride2"}) {
        ok = ok && sm(k, "AND", 8) > sm("1t1mtj", "AND", 8) && sm(k, "XNOR", 8) > sm("2t2mtj", "XNOR", 8);
        for (const char* s : {"AND", "XNOR"}) ok = ok && sm(k, s, 16) > 0.0;
    }
    for (const char* k : {"1t1mtj", "2t2mtj"})
        for (const char* s : {"AND", "XNOR"}) ok = ok && sm(k, s, 16) < sm(k, s, 8);
    for (const auto& x : r) ok = ok && x["combos"] == 8000;
    d = "pwa8 AND S1/S2/1T1 " + fmt("%.2f", sm("stride1", "AND", 8) * 1e6) + "/" +
        fmt("%.2f", sm("stride2", "AND", 8) * 1e6) + "/" + fmt("%.2f", sm("1t1mtj", "AND", 8) * 1e6) +
        " uA; pwa8 XNOR S1/S2/2T2 " + fmt("%.2f", sm("stride1", "XNOR", 8) * 1e6) + "/" +
        fmt("%.2f", sm("stride2", "XNOR", 8) * 1e6) + "/" + fmt("%.2f", sm("2t2mtj", "XNOR", 8) * 1e6) +
        " uA; pwa16 min STRIDe " +
        fmt("%.2f uA",
            1e6 * std::min({sm("stride1", "AND", 16), sm("stride1", "XNOR", 16), sm("stride2", "AND", 16),
                            sm("stride2", "XNOR", 16)}));
    return {ok, d};
}

Verdict variation_ordering(const json& r) {
    double base_on = 0.0;
    for (const char* k : {"1t1mtj", "2t2mtj"})
        base_on = std::max(base_on, find(r, [&](const json& x) { return x["design"] == k; })["on_sigma_fraction"]
                                        .get<double>());
    bool ok = true;
    std::string d;
    for (const char* k : {"stride1", "stride2"}) {
        const auto& x = find(r, [&](const json& y) { return y["design"] == k; });
        const double off = x["off_sigma_fraction"].get<double>();
        const double on = x["on_sigma_fraction"].get<double>();
        const double tail = x["off_plus_3sigma_over_on"].get<double>();
        ok = ok && off > 0.5 && on < base_on + 0.05 && tail < 0.01;
        d += std::string(k) + " OFF " + fmt("%.1f%%", 100 * off) + " ON " + fmt("%.1f%%", 100 * on) +
             " OFF+3s/I_H " + fmt("%.2f%%", 100 * tail) + "; ";
    }
    return {ok, d + "baseline ON " + fmt("%.1f%%", 100 * base_on)};
}

Verdict inference_ordering(const json& r) {
    bool ok = true;
    std::string d;
    std::set<std::string> nets;
    for (const auto& x : r) nets.insert(x["network"].get<std::string>());
    for (const auto& net : nets) {
        auto acc = [&](const char* k, const char* f) {
            return find(r, [&](const json& x) {
                       return x["network"] == net && x["design"] == k && x["pwa"] == 16 && x["fidelity"] == f;
                   })["report"];
        };
        for (const char* k : {"1t1mtj", "2t2mtj", "stride1", "stride2"}) {
            const auto& rep = acc(k, "ideal");
            ok = ok && rep["accuracy"] == rep["reference_accuracy"];
        }
        const double ideal = acc("stride1", "ideal")["accuracy"].get<double>();
        const double b = std::max(acc("1t1mtj", "nonideal+variation")["accuracy"].get<double>(),
                                  acc("2t2mtj", "nonideal+variation")["accuracy"].get<double>());
        d += net + ": ideal " + fmt("%.1f", 100 * ideal) + ", best baseline " + fmt("%.1f", 100 * b);
        for (const char* k : {"stride1", "stride2"}) {
            const double a = acc(k, "nonideal+variation")["accuracy"].get<double>();
            ok = ok && a - b >= 0.05 && ideal - a <= 0.03;
            d += std::string(", ") + k + " " + fmt("%.1f", 100 * a);
        }
        d += "; ";
    }
    d.resize(d.size() - 2);
    return {ok, d + " (%, pwa 16, nonideal+variation)"};
}

Verdict write_dynamics(const json& r) {
    const double ic = r["critical_current"].get<double>();
    const double dyn = std::max(r["dynamic_critical_current_p_to_ap"].get<double>(),
                                r["dynamic_critical_current_ap_to_p"].get<double>());
    const auto& d = r["designs"];
    const auto& s1 = find(d, [](const json& x) { return x["design"] == "stride1"; });
    const auto& s2 = find(d, [](const json& x) { return x["design"] == "stride2"; });
    const double lat1 = s1["latency_ratio"].get<double>(), en1 = s1["energy_ratio"].get<double>();
    const double lat2 = s2["latency_ratio"].get<double>();
    const bool ok = std::abs(ic / 75.96e-6 - 1) <= 0.10 && std::abs(dyn / ic - 1) <= 0.10 &&
                    std::abs(lat1 / 1.44 - 1) <= 0.20 && std::abs(en1 / 1.39 - 1) <= 0.20 && lat2 > lat1;
    return {ok, "Ic " + fmt("%.2f uA", ic * 1e6) + ", bisection " + fmt("%.2f uA", dyn * 1e6) + ", S1 " +
                    fmt("%.2f", lat1) + "x/" + fmt("%.2fx", en1) + ", S2 latency " + fmt("%.2fx", lat2)};
}

Verdict determinism(const fs::path& a, const fs::path& b, const std::vector<std::string>& fails) {
    std::size_t files = 0, differ = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        ++files;
        const auto other = b / e.path().filename();
        if (!fs::exists(other) || read_all(e.path()) != read_all(other)) ++differ;
    }
    std::size_t extra = 0;
    for (const auto& e : fs::directory_iterator(b)) extra += !fs::exists(a / e.path().filename());
    const bool ok = fails.empty() && files > 0 && differ == 0 && extra == 0;
    std::string d = std::to_string(files) + " files compared, " + std::to_string(differ + extra) + " differ";
    for (const auto& f : fails) d += "; " + f + " exited non-zero";
    return {ok, d};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"xbar-imc-sim acceptance"};
    std::string cli, work;
    std::vector<int> known;
    app.add_option("--cli", cli, "xbar-imc-sim binary")->required();
    app.add_option("--work", work, "scratch directory")->required();
    app.add_option("--known-failure", known, "criteria reported but excluded from the exit status");
    CLI11_PARSE(app, argc, argv);

    const fs::path src = fs::current_path();
    Cli runner{fs::absolute(cli), fs::absolute(work), {}};
    fs::create_directories(runner.work);
    const auto cfg = runner.work / "acceptance.cfg";
    {
        std::ofstream f(cfg);
        f << "[inference]\n"
          << "networks = " << (src / "fixtures/digits_bnn/manifest.json").string() << ", "
          << (src / "fixtures/digits_int4/manifest.json").string() << "\n"
          << "dataset = " << (src / "fixtures/digits_test.csv").string() << "\n";
    }

    int failed = 0;
    auto report = [&](int id, const char* name, double limit_s, double secs, Verdict v) {
        const bool timed_ok = limit_s <= 0 || secs < limit_s;
        const bool pass = v.pass && timed_ok;
        const bool excused = std::find(known.begin(), known.end(), id) != known.end();
        std::cout << "[" << id << "] " << (pass ? "PASS" : "FAIL") << "  " << name << ": " << v.detail << " ["
                  << fmt("%.1f s", secs) << (limit_s > 0 ? ", limit " + fmt("%.0f s", limit_s) : std::string())
                  << "]" << (excused && !pass ? " (known failure)" : "")
                  << (excused && pass ? " (listed as known failure but passed)" : "") << std::endl;
        if (!pass && !excused) ++failed;
    };
    auto timed = [&](int id, const char* name, double limit_s, const std::function<Verdict()>& f) {
        const auto t0 = Clock::now();
        Verdict v;
        try {
            v = f();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        report(id, name, limit_s, seconds_since(t0), v);
    };

    timed(1, "encoding exactness", 60, encoding_exactness);
    timed(2, "solver oracle equivalence", 300, solver_oracle);
    timed(3, "RDM formula", 0, rdm_values);
    timed(4, "worst-case effective V_READ", 0, worst_case_vread_check);

    const std::vector<std::string> cmds{"gen-lut", "sweep-vread", "sm", "rdm", "montecarlo", "infer", "write-sim"};
    const auto run_a = runner.work / "run_a", run_b = runner.work / "run_b";
    std::vector<std::string> fails;
    for (const auto& dir : {run_a, run_b}) {
        fs::remove_all(dir);
        for (const auto& c : cmds)
            if (runner.run(c, dir, cfg) != 0) fails.push_back(c);
    }
    auto from_cli = [&](int id, const char* name, const char* cmd, double limit_s,
                        const std::function<Verdict(const json&)>& f) {
        Verdict v;
        try {
            v = f(load_results(run_a / (std::string(cmd) + ".json")));
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        report(id, name, limit_s, runner.seconds[cmd], v);
    };
    from_cli(5, "distinguishability", "sweep-vread", 0, distinguishability);
    from_cli(6, "sense-margin ordering", "sm", 1800, sm_ordering);
    from_cli(7, "variation ordering", "montecarlo", 0, variation_ordering);
    from_cli(8, "inference ordering", "infer", 1200, inference_ordering);
    from_cli(9, "write dynamics", "write-sim", 0, write_dynamics);
    double total = 0;
    for (const auto& [k, s] : runner.seconds) total += s;
    report(10, "determinism", 0, total, determinism(run_a, run_b, fails));

    std::cout << (failed == 0 ? "acceptance: all required criteria pass" : "acceptance: " + std::to_string(failed) +
                                                                                " criteria failed")
              << std::endl;
    return failed == 0 ? 0 : 1;
}
