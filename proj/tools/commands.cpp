#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "xbar/config.hpp"
#include "xbar/crossbar.hpp"
#include "xbar/errors.hpp"
#include "xbar/inference.hpp"
#include "xbar/lut.hpp"
#include "xbar/metrics.hpp"
#include "xbar/report.hpp"
#include "xbar/robustness.hpp"
#include "xbar/variation.hpp"
#include "xbar/write_dynamics.hpp"

namespace xbar::cli {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

struct Context {
    std::string command;
    ExperimentConfig cfg;
    DeviceParams params;
    std::uint64_t seed = 0;
    unsigned workers = 1;
    fs::path out_dir;
    bool force = false;
    std::vector<std::pair<std::string, std::string>> files;

    // Refuses to start when an output would be clobbered.
    void claim(const std::vector<std::string>& names) const {
        if (force) return;
        for (const auto& n : names) {
            if (fs::exists(out_dir / n))
                throw IoError((out_dir / n).string() + " already exists (use --force to overwrite)");
        }
    }
    void add(std::string name, std::string content) {
        files.emplace_back(std::move(name), std::move(content));
    }
    void flush() const {
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
        for (const auto& [name, content] : files) {
            const auto path = out_dir / name;
            std::ofstream f(path, std::ios::binary | std::ios::trunc);
            if (!f) throw IoError("cannot open " + path.string() + " for writing");
            f.write(content.data(), static_cast<std::streamsize>(content.size()));
            if (!f) throw IoError("write failed: " + path.string());
        }
    }

    Json envelope(Json results) const {
        Json j;
        j["tool"] = "xbar-imc-sim";
        j["version"] = std::string(tool_version());
        j["command"] = command;
        j["config_hash"] = cfg.hash();
        j["seed"] = seed;
        j["results"] = std::move(results);
        return j;
    }
    void add_json(const std::string& name, Json results) {
        add(name, envelope(std::move(results)).dump(2) + "\n");
    }

    std::uint64_t derive(std::string_view tag) const {
        return fnv1a64(std::to_string(seed) + ":" + std::string(tag));
    }
};

std::string kind_name(BitcellKind k) { return std::string(config_kind_name(k)); }

Json num(double v) { return Json(v); }

CrossbarConfig crossbar_for(const Context& c, BitcellKind kind) {
    CrossbarConfig x = default_crossbar_config(kind, c.params);
    x.rows = static_cast<std::size_t>(c.cfg.integer("crossbar.rows"));
    x.cols = static_cast<std::size_t>(c.cfg.integer("crossbar.cols"));
    x.r_driver = c.cfg.number("crossbar.r_driver");
    x.r_sink = c.cfg.number("crossbar.r_sink");
    if (!c.cfg.is_auto("crossbar.v_wl")) x.v_wl = c.cfg.number("crossbar.v_wl");
    const std::string pre = "crossbar." + kind_name(kind) + ".";
    if (!c.cfg.is_auto(pre + "v_read")) x.v_read = c.cfg.number(pre + "v_read");
    if (!c.cfg.is_auto(pre + "r_wire")) x.r_wire = c.cfg.number(pre + "r_wire");
    x.validate();
    return x;
}

SolveOptions solve_options(const Context& c) {
    SolveOptions s;
    s.tol = c.cfg.number("crossbar.solver_tol");
    s.max_iter = static_cast<int>(c.cfg.integer("crossbar.solver_max_iter"));
    return s;
}

BitcellLut build_lut(const Context& c, const CrossbarConfig& x) {
    BitcellLut::BuildOptions bo;
    bo.step = c.cfg.number("crossbar.lut_step");
    bo.v_max = bo.step * std::ceil((x.v_read + 0.01) / bo.step - 1e-9);
    bo.v_wl = x.v_wl;
    bo.workers = c.workers;
    return BitcellLut::build(x.kind, c.params, bo);
}

std::vector<std::size_t> pwa_list(const Context& c, std::string_view key) {
    std::vector<std::size_t> out;
    for (double v : c.cfg.numbers(key)) out.push_back(static_cast<std::size_t>(v));
    return out;
}

std::vector<ImcMode> modes(const Context& c) {
    std::vector<ImcMode> out;
    for (const auto& s : c.cfg.strings("scheme.modes")) out.push_back(parse_mode(s));
    return out;
}

std::string fmt(double v, int prec) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(prec);
    os << v;
    return os.str();
}

// ---------------------------------------------------------------- gen-lut

std::string cmd_gen_lut(Context& c) {
    const auto kinds = c.cfg.kinds();
    std::vector<std::string> names;
    for (auto k : kinds) names.push_back("lut_" + kind_name(k) + ".lut");
    names.push_back("gen-lut.json");
    c.claim(names);

    Json res = Json::array();
    std::vector<BitcellLut> luts;
    for (auto k : kinds) {
        const auto x = crossbar_for(c, k);
        luts.push_back(build_lut(c, x));
        const auto& l = luts.back();
        Json e;
        e["design"] = kind_name(k);
        e["file"] = "lut_" + kind_name(k) + ".lut";
        e["params_hash"] = l.params_hash();
        e["v_max"] = num(l.v_max());
        e["step"] = num(l.step());
        e["v_wl"] = num(l.v_wl());
        e["nx"] = l.nx();
        e["ny"] = l.ny();
        res.push_back(e);
    }
    c.add_json("gen-lut.json", res);
    c.flush();
    // LUT files are written by the table's own serializer.
    for (std::size_t i = 0; i < kinds.size(); ++i)
        luts[i].save(c.out_dir / ("lut_" + kind_name(kinds[i]) + ".lut"));
    return "gen-lut: " + std::to_string(kinds.size()) + " tables written to " + c.out_dir.string();
}

// ---------------------------------------------------------------- sweep-vread

std::string cmd_sweep_vread(Context& c) {
    c.claim({"sweep-vread.csv", "sweep-vread.json"});
    const double lo = c.cfg.number("sweep.v_lo"), hi = c.cfg.number("sweep.v_hi");
    const auto steps = static_cast<std::size_t>(c.cfg.integer("sweep.steps"));
    if (!(hi > lo)) throw ConfigError("[sweep] v_hi must exceed v_lo");

    std::ostringstream csv;
    CsvWriter w(csv);
    w.row({"design", "v_read", "i_high", "i_low", "ratio"});
    Json res = Json::array();
    std::map<BitcellKind, double> peak;
    std::string summary = "sweep-vread:";
    for (auto k : c.cfg.kinds()) {
        const auto r = sweep_vread(k, c.params, lo, hi, steps);
        for (const auto& p : r.points) {
            w.cell(kind_name(k)).cell(p.v_read).cell(p.i_high).cell(p.i_low).cell(p.ratio);
            w.end_row();
        }
        const auto& best = r.points[r.argmax];
        peak[k] = best.ratio;
        const auto x = crossbar_for(c, k);
        const auto op = read_currents(k, c.params, x.v_read);
        Json e;
        e["design"] = kind_name(k);
        e["peak_ratio"] = num(best.ratio);
        e["v_at_peak"] = num(best.v_read);
        e["interior_maximum"] = r.interior_maximum();
        e["operating_v_read"] = num(x.v_read);
        e["operating_i_high"] = num(op.i_high);
        e["operating_i_low"] = num(op.i_low);
        e["operating_ratio"] = num(op.ratio);
        res.push_back(e);
        summary += " " + kind_name(k) + " peak " + fmt(best.ratio, 1) + " @ " + fmt(best.v_read, 3) + " V;";
    }
    if (peak.count(BitcellKind::TwoT2MTJ)) {
        for (auto& e : res) {
            const auto k = parse_kind(e["design"].get<std::string>());
            e["peak_over_2t2mtj"] = num(peak[k] / peak[BitcellKind::TwoT2MTJ]);
        }
    }
    c.add("sweep-vread.csv", csv.str());
    c.add_json("sweep-vread.json", res);
    c.flush();
    summary.pop_back();
    return summary;
}

// ---------------------------------------------------------------- sm

std::string cmd_sm(Context& c) {
    c.claim({"sm.csv", "sm.json"});
    const auto n_combos = static_cast<std::size_t>(c.cfg.integer("sm.combos"));
    const bool exhaustive = c.cfg.boolean("sm.exhaustive");
    const auto pwas = pwa_list(c, "crossbar.pwa");
    const auto solve = solve_options(c);

    std::ostringstream csv;
    CsvWriter w(csv);
    w.row({"design", "scheme", "pwa", "combos", "worst_sm", "worst_state", "unit_current",
           "worst_case_vread"});
    Json res = Json::array();
    std::string summary = "sm:";
    for (auto k : c.cfg.kinds()) {
        const auto x = crossbar_for(c, k);
        std::optional<BitcellLut> lut;
        if (x.r_sink == 0.0) lut = build_lut(c, x);
        ImcContext ctx;
        ctx.params = &c.params;
        ctx.lut = lut ? &*lut : nullptr;
        ctx.solve = solve;
        const double unit = unit_current(k, c.params, x.v_read);
        const double i_high = read_currents(k, c.params, x.v_read).i_high;
        for (auto m : modes(c)) {
            for (auto pwa : pwas) {
                const auto tag = "sm:" + std::string(to_string(m)) + ":" + std::to_string(pwa);
                const auto passes = exhaustive ? exhaustive_sm_passes(x, m, pwa)
                                               : sample_sm_passes(x, m, pwa, n_combos, c.derive(tag));
                const std::size_t combos = exhaustive ? (std::size_t{1} << (2 * pwa)) : n_combos;
                const auto a = worst_case_sm(x, m, pwa, passes, combos, ctx, {}, 0, c.workers);
                const double v_eff = worst_case_vread(x.v_read, i_high, pwa, x.rows, x.r_driver, x.r_wire);
                w.cell(kind_name(k)).cell(to_string(m)).cell(pwa).cell(a.combos).cell(a.worst.sm)
                    .cell(a.worst.state).cell(unit).cell(v_eff);
                w.end_row();
                Json e;
                e["design"] = kind_name(k);
                e["scheme"] = std::string(to_string(m));
                e["pwa"] = pwa;
                e["combos"] = a.combos;
                e["worst_sm"] = num(a.worst.sm);
                e["worst_state"] = a.worst.state;
                e["unit_current"] = num(unit);
                e["v_read"] = num(x.v_read);
                e["r_wire"] = num(x.r_wire);
                e["worst_case_vread"] = num(v_eff);
                Json states = Json::array();
                for (const auto& [s, cur] : a.histogram.bins()) {
                    const auto [mn, mx] = std::minmax_element(cur.begin(), cur.end());
                    Json b;
                    b["state"] = s;
                    b["count"] = cur.size();
                    b["min"] = num(*mn);
                    b["max"] = num(*mx);
                    states.push_back(b);
                }
                e["states"] = states;
                res.push_back(e);
                summary += " " + kind_name(k) + "/" + std::string(to_string(m)) + "/" +
                           std::to_string(pwa) + " " + fmt(a.worst.sm * 1e6, 2) + "uA;";
            }
        }
    }
    c.add("sm.csv", csv.str());
    c.add_json("sm.json", res);
    c.flush();
    summary.pop_back();
    return summary;
}

// ---------------------------------------------------------------- rdm

std::string cmd_rdm(Context& c) {
    c.claim({"rdm.csv", "rdm.json"});
    const double i_cr = critical_current(c.params);
    std::ostringstream csv;
    CsvWriter w(csv);
    w.row({"design", "v_read", "i_cr", "i_p_branch", "rdm_percent"});
    Json res = Json::array();
    std::string summary = "rdm: I_CR " + fmt(i_cr * 1e6, 2) + "uA;";
    for (auto k : c.cfg.kinds()) {
        const auto x = crossbar_for(c, k);
        const auto op = read_currents(k, c.params, x.v_read);
        // Anti-parallelizing read current flows in the P branch: I_H for the
        // baselines, I_L for the cross-coupled cells.
        const double i_mtj = is_stride(k) ? op.i_low : op.i_high;
        const double margin = rdm(i_cr, i_mtj);
        w.cell(kind_name(k)).cell(x.v_read).cell(i_cr).cell(i_mtj).cell(margin);
        w.end_row();
        Json e;
        e["design"] = kind_name(k);
        e["v_read"] = num(x.v_read);
        e["i_cr"] = num(i_cr);
        e["i_p_branch"] = num(i_mtj);
        e["rdm_percent"] = num(margin);
        res.push_back(e);
        summary += " " + kind_name(k) + " " + fmt(margin, 3) + "%;";
    }
    c.add("rdm.csv", csv.str());
    c.add_json("rdm.json", res);
    c.flush();
    summary.pop_back();
    return summary;
}

// ---------------------------------------------------------------- montecarlo

std::string cmd_montecarlo(Context& c) {
    const bool dump = c.cfg.boolean("variation.dump_samples");
    std::vector<std::string> names{"montecarlo.csv", "montecarlo.json"};
    if (dump) names.push_back("montecarlo_samples.csv");
    c.claim(names);
    const auto spec = c.cfg.variation_spec();
    const auto trials = static_cast<std::size_t>(c.cfg.integer("variation.trials"));

    std::ostringstream csv, samples;
    CsvWriter w(csv), ws(samples);
    w.row({"design", "state", "role", "nominal", "mean", "sigma", "sigma_fraction", "trials",
           "failures"});
    ws.row({"design", "stored", "trial", "i_left", "i_right"});
    Json res = Json::array();
    std::string summary = "montecarlo:";
    for (auto k : c.cfg.kinds()) {
        const auto x = crossbar_for(c, k);
        const auto tv = TerminalVoltages::read(x.v_read, x.v_wl);
        const auto seed = c.derive("mc:" + kind_name(k));
        // P and AP branch statistics for the sensed state of each branch
        BranchStats p_stats, ap_stats;
        double p_nom = 0.0, ap_nom = 0.0;
        std::size_t failures = 0;
        auto dump_run = [&](const McResult& r, std::string_view stored) {
            if (!dump) return;
            for (std::size_t t = 0; t < r.samples.size(); ++t) {
                ws.cell(kind_name(k)).cell(stored).cell(t).cell(r.samples[t][0]).cell(r.samples[t][1]);
                ws.end_row();
            }
        };
        if (is_two_mtj(k)) {
            const auto r = bitcell_mc(k, CellWeight::pap(), tv, c.params, spec, trials, seed, c.workers);
            const auto nom = solve_bitcell_dc(k, CellWeight::pap(), tv, c.params);
            p_stats = r.left;
            ap_stats = r.right;
            p_nom = nom.i_left;
            ap_nom = nom.i_right;
            failures = r.failures;
            dump_run(r, "P,AP");
        } else {
            const auto rp = bitcell_mc(k, CellWeight::single(MtjState::P), tv, c.params, spec, trials,
                                       seed, c.workers);
            const auto ra = bitcell_mc(k, CellWeight::single(MtjState::AP), tv, c.params, spec,
                                       trials, seed ^ 0x5bd1e995ULL, c.workers);
            p_stats = rp.left;
            ap_stats = ra.left;
            p_nom = solve_bitcell_dc(k, CellWeight::single(MtjState::P), tv, c.params).i_left;
            ap_nom = solve_bitcell_dc(k, CellWeight::single(MtjState::AP), tv, c.params).i_left;
            failures = rp.failures + ra.failures;
            dump_run(rp, "P");
            dump_run(ra, "AP");
        }
        // ON is the high-current branch: AP for cross-coupled cells, P otherwise.
        const bool ap_on = is_stride(k);
        const auto& on = ap_on ? ap_stats : p_stats;
        const auto& off = ap_on ? p_stats : ap_stats;
        for (int s = 0; s < 2; ++s) {
            const bool is_p = s == 0;
            const auto& st = is_p ? p_stats : ap_stats;
            const bool is_on = is_p != ap_on;
            w.cell(kind_name(k)).cell(is_p ? "P" : "AP").cell(is_on ? "on" : "off")
                .cell(is_p ? p_nom : ap_nom).cell(st.mean).cell(st.sigma).cell(st.sigma_fraction)
                .cell(trials).cell(failures);
            w.end_row();
        }
        const double off_3s = off.mean + 3.0 * off.sigma;
        Json e;
        e["design"] = kind_name(k);
        e["v_read"] = num(x.v_read);
        e["trials"] = trials;
        e["failures"] = failures;
        e["sigma_p"] = num(p_stats.sigma_fraction);
        e["sigma_ap"] = num(ap_stats.sigma_fraction);
        e["on_mean"] = num(on.mean);
        e["on_sigma_fraction"] = num(on.sigma_fraction);
        e["off_mean"] = num(off.mean);
        e["off_sigma_fraction"] = num(off.sigma_fraction);
        e["off_plus_3sigma"] = num(off_3s);
        e["off_plus_3sigma_over_on"] = num(off_3s / on.mean);
        res.push_back(e);
        summary += " " + kind_name(k) + " on " + fmt(on.sigma_fraction * 100, 1) + "% off " +
                   fmt(off.sigma_fraction * 100, 1) + "%;";
    }
    c.add("montecarlo.csv", csv.str());
    if (dump) c.add("montecarlo_samples.csv", samples.str());
    c.add_json("montecarlo.json", res);
    c.flush();
    summary.pop_back();
    return summary;
}

// ---------------------------------------------------------------- infer

std::string cmd_infer(Context& c) {
    c.claim({"infer.csv", "infer_layers.csv", "infer.json"});
    const auto dataset = load_dataset_csv(c.cfg.raw("inference.dataset"));
    std::vector<QuantNetwork> nets;
    for (const auto& path : c.cfg.strings("inference.networks")) nets.push_back(load_network(path));
    std::vector<Fidelity> fids;
    for (const auto& f : c.cfg.strings("inference.fidelities")) fids.push_back(parse_fidelity(f));
    const auto pwas = pwa_list(c, "inference.pwa");
    const auto spec = c.cfg.variation_spec();
    const auto trials = static_cast<std::size_t>(c.cfg.integer("variation.trials"));
    const auto cal_combos = static_cast<std::size_t>(c.cfg.integer("adc.calibration_combos"));
    const auto loss = c.cfg.raw("adc.loss") == "mse" ? AdcLoss::Mse : AdcLoss::Mae;
    const auto max_samples = static_cast<std::size_t>(c.cfg.integer("inference.max_samples"));
    const auto solve = solve_options(c);
    const bool need_sigma = std::find(fids.begin(), fids.end(), Fidelity::NonIdealVariation) != fids.end();

    std::ostringstream csv, lcsv;
    CsvWriter w(csv), wl(lcsv);
    w.row({"network", "design", "pwa", "fidelity", "samples", "accuracy", "reference_accuracy",
           "adc_bits", "i_quant"});
    wl.row({"network", "design", "pwa", "fidelity", "layer", "mvm_mean_abs_error",
            "mvm_max_abs_error"});
    Json res = Json::array();
    std::string summary = "infer:";
    for (auto k : c.cfg.kinds()) {
        const auto x = crossbar_for(c, k);
        std::optional<BitcellLut> lut;
        if (x.r_sink == 0.0) lut = build_lut(c, x);
        ImcContext ctx;
        ctx.params = &c.params;
        ctx.lut = lut ? &*lut : nullptr;
        ctx.solve = solve;
        std::optional<CurrentSigma> sigma;
        if (need_sigma)
            sigma = extract_current_sigma(k, c.params, spec, x.v_read, trials,
                                          c.derive("mc:" + kind_name(k)), c.workers);
        for (const auto& net : nets) {
            for (auto pwa : pwas) {
                const auto plan = compile_network(net, x, pwa);
                for (auto fid : fids) {
                    InferenceSetup su;
                    su.fidelity = fid;
                    su.params = &c.params;
                    su.lut = ctx.lut;
                    su.solve = solve;
                    su.workers = c.workers;
                    su.max_samples = max_samples;
                    su.seed = c.derive("infer:" + net.name + ":" + std::to_string(pwa));
                    su.adc.bits = adc_bits_for_pwa(pwa);
                    std::optional<CurrentSigma> cs;
                    if (fid == Fidelity::NonIdealVariation) cs = su.sigma = sigma;
                    std::optional<IquantSweep> sweep;
                    if (fid != Fidelity::Ideal) {
                        const auto tag = "adc:" + std::string(to_string(net.mode())) + ":" +
                                         std::to_string(pwa);
                        sweep = calibrate_adc(x, net.mode(), pwa, ctx, cal_combos, c.derive(tag), cs,
                                              c.workers, loss);
                        su.adc = sweep->best;
                    } else {
                        su.adc.i_quant = unit_current(k, c.params, x.v_read);
                    }
                    const auto r = run_inference(plan, net, dataset, su);
                    const auto fname = std::string(to_string(fid));
                    w.cell(net.name).cell(kind_name(k)).cell(pwa).cell(fname).cell(r.samples)
                        .cell(r.accuracy).cell(r.reference_accuracy).cell(su.adc.bits)
                        .cell(su.adc.i_quant);
                    w.end_row();
                    for (std::size_t l = 0; l < r.layers.size(); ++l) {
                        wl.cell(net.name).cell(kind_name(k)).cell(pwa).cell(fname)
                            .cell(net.layers[l].name).cell(r.layers[l].mean_abs)
                            .cell(r.layers[l].max_abs);
                        wl.end_row();
                    }
                    Json e;
                    e["network"] = net.name;
                    e["design"] = kind_name(k);
                    e["pwa"] = pwa;
                    e["fidelity"] = fname;
                    e["adc"] = {{"bits", su.adc.bits}, {"i_quant", num(su.adc.i_quant)},
                                {"signed", su.adc.is_signed}};
                    if (cs) e["sigma"] = {{"p", num(cs->p)}, {"ap", num(cs->ap)}};
                    e["report"] = Json::parse(inference_report_json(r));
                    res.push_back(e);
                    summary += " " + net.name + "/" + kind_name(k) + "/" + std::to_string(pwa) + "/" +
                               fname + " " + fmt(r.accuracy * 100, 1) + "%;";
                }
            }
        }
    }
    c.add("infer.csv", csv.str());
    c.add("infer_layers.csv", lcsv.str());
    c.add_json("infer.json", res);
    c.flush();
    summary.pop_back();
    return summary;
}

// ---------------------------------------------------------------- write-sim

std::string cmd_write_sim(Context& c) {
    c.claim({"write-sim.csv", "write-sim.json", "write_trajectory.csv"});
    const auto scheme = c.cfg.write_scheme();
    const double ic = critical_current(c.params);
    LlgsOptions bis = scheme.llgs;
    bis.horizon_ns = std::min(scheme.llgs.horizon_ns, 100.0);
    const double ic_p = dynamic_critical_current(c.params, MtjState::P, bis);
    const double ic_ap = dynamic_critical_current(c.params, MtjState::AP, bis);

    LlgsOptions traj = scheme.llgs;
    traj.horizon_ns = bis.horizon_ns;
    traj.record_every = std::max(1, static_cast<int>(std::lround(0.1 / traj.dt_ns)));
    const auto tr = llgs_simulate(c.params, 2.0 * ic, MtjState::P, traj);
    std::ostringstream tcsv;
    CsvWriter wt(tcsv);
    wt.row({"t_ns", "m_x", "m_y", "m_z"});
    for (const auto& pt : tr.trajectory) {
        wt.cell(pt.t_ns).cell(pt.m[0]).cell(pt.m[1]).cell(pt.m[2]);
        wt.end_row();
    }

    std::ostringstream csv;
    CsvWriter w(csv);
    w.row({"design", "switched", "latency_ns", "energy_j", "latency_ratio", "energy_ratio"});
    Json designs = Json::array();
    std::string summary = "write-sim: Ic " + fmt(ic * 1e6, 2) + "uA;";
    for (auto k : c.cfg.kinds()) {
        const auto cmp = compare_write_cost(k, scheme, c.params);
        w.cell(kind_name(k)).cell(cmp.cost.switched ? "true" : "false").cell(cmp.cost.latency_ns)
            .cell(cmp.cost.energy_j).cell(cmp.latency_ratio).cell(cmp.energy_ratio);
        w.end_row();
        Json e;
        e["design"] = kind_name(k);
        e["switched"] = cmp.cost.switched;
        e["latency_ns"] = num(cmp.cost.latency_ns);
        e["energy_j"] = num(cmp.cost.energy_j);
        e["latency_ratio"] = num(cmp.latency_ratio);
        e["energy_ratio"] = num(cmp.energy_ratio);
        designs.push_back(e);
        summary += " " + kind_name(k) + " latency x" + fmt(cmp.latency_ratio, 2) + " energy x" +
                   fmt(cmp.energy_ratio, 2) + ";";
    }
    Json res;
    res["critical_current"] = num(ic);
    res["dynamic_critical_current_p_to_ap"] = num(ic_p);
    res["dynamic_critical_current_ap_to_p"] = num(ic_ap);
    res["bisection_horizon_ns"] = num(bis.horizon_ns);
    res["energy_barrier_kt"] = num(computed_energy_barrier_kt(c.params));
    res["trajectory"] = {{"current", num(2.0 * ic)},
                         {"switched", tr.switched},
                         {"latency_ns", num(tr.latency_ns)}};
    res["designs"] = designs;
    c.add("write-sim.csv", csv.str());
    c.add("write_trajectory.csv", tcsv.str());
    c.add_json("write-sim.json", res);
    c.flush();
    summary.pop_back();
    return summary;
}

using Handler = std::function<std::string(Context&)>;

const std::vector<std::pair<std::string, Handler>>& table() {
    static const std::vector<std::pair<std::string, Handler>> t = {
        {"gen-lut", cmd_gen_lut},     {"sweep-vread", cmd_sweep_vread},
        {"sm", cmd_sm},               {"rdm", cmd_rdm},
        {"montecarlo", cmd_montecarlo}, {"infer", cmd_infer},
        {"write-sim", cmd_write_sim},
    };
    return t;
}

}  // namespace

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& [n, h] : table()) v.push_back(n);
        return v;
    }();
    return names;
}

int run(const std::string& subcommand, const RunOptions& opt, std::ostream& out, std::ostream& err) {
    const auto it = std::find_if(table().begin(), table().end(),
                                 [&](const auto& e) { return e.first == subcommand; });
    if (it == table().end()) {
        err << "error: unknown subcommand '" << subcommand << "'\n";
        return kConfig;
    }
    try {
        Context c;
        c.command = subcommand;
        if (opt.config) c.cfg.load_file(*opt.config);
        for (const auto& o : opt.overrides) {
            const auto eq = o.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + o + "'");
            auto trim = [](std::string s) {
                const auto b = s.find_first_not_of(" \t");
                const auto e = s.find_last_not_of(" \t");
                return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
            };
            c.cfg.set(trim(o.substr(0, eq)), trim(o.substr(eq + 1)));
        }
        if (opt.seed) c.cfg.set("seed", std::to_string(*opt.seed));
        if (opt.workers) c.cfg.set("workers", std::to_string(*opt.workers));
        if (opt.out) c.cfg.set("out", *opt.out);
        c.cfg.validate();

        c.params = c.cfg.device_params();
        c.seed = static_cast<std::uint64_t>(c.cfg.integer("seed"));
        const auto w = c.cfg.integer("workers");
        c.workers = w > 0 ? static_cast<unsigned>(w) : std::max(1u, std::thread::hardware_concurrency());
        c.out_dir = c.cfg.raw("out");
        c.force = opt.force;
        out << it->second(c) << "\n";
        return kOk;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const ParameterError& e) {
        err << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const ConvergenceError& e) {
        err << "non-convergence: " << e.what() << " (last residual " << e.last_residual() << ")\n";
        return kNonConvergence;
    } catch (const IoError& e) {
        err << "i/o error: " << e.what() << "\n";
        return kIo;
    } catch (const fs::filesystem_error& e) {
        err << "i/o error: " << e.what() << "\n";
        return kIo;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kInternal;
    }
}

}  // namespace xbar::cli
