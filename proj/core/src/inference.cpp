#include "xbar/inference.hpp"

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "xbar/errors.hpp"

namespace xbar {

std::string_view to_string(Precision p) { return p == Precision::Binary ? "binary" : "int4"; }

std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::Sign: return "sign";
        case Activation::Relu4: return "relu4";
        case Activation::None: return "none";
    }
    return "none";
}

std::string_view to_string(Fidelity f) {
    switch (f) {
        case Fidelity::Ideal: return "ideal";
        case Fidelity::NonIdeal: return "nonideal";
        case Fidelity::NonIdealVariation: return "nonideal+variation";
    }
    return "ideal";
}

Fidelity parse_fidelity(std::string_view s) {
    if (s == "ideal") return Fidelity::Ideal;
    if (s == "nonideal") return Fidelity::NonIdeal;
    if (s == "nonideal+variation") return Fidelity::NonIdealVariation;
    throw ParameterError("unknown fidelity '" + std::string(s) + "'");
}

namespace {

Activation parse_activation(std::string_view s) {
    if (s == "sign") return Activation::Sign;
    if (s == "relu4") return Activation::Relu4;
    if (s == "none") return Activation::None;
    throw ParameterError("unknown activation '" + std::string(s) + "'");
}

bool weight_ok(Precision p, int w) {
    return p == Precision::Binary ? (w == -1 || w == 1) : (w >= -8 && w <= 7);
}

void write_u32(std::ostream& f, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) f.put(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t read_u32(std::istream& f) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        const int c = f.get();
        if (c == std::char_traits<char>::eof()) throw IoError("truncated tensor blob");
        v |= static_cast<std::uint32_t>(c & 0xff) << (8 * i);
    }
    return v;
}

void write_blob(const std::filesystem::path& p, const std::vector<std::uint32_t>& shape,
                const std::vector<long long>& data) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw IoError("cannot open '" + p.string() + "' for writing");
    write_u32(f, static_cast<std::uint32_t>(shape.size()));
    for (auto d : shape) write_u32(f, d);
    for (long long v : data) write_u32(f, static_cast<std::uint32_t>(static_cast<std::int32_t>(v)));
    if (!f) throw IoError("write failed for '" + p.string() + "'");
}

std::vector<long long> read_blob(const std::filesystem::path& p, std::vector<std::uint32_t>& shape) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw IoError("cannot open '" + p.string() + "'");
    const std::uint32_t nd = read_u32(f);
    if (nd == 0 || nd > 4) throw IoError("bad tensor rank in '" + p.string() + "'");
    shape.resize(nd);
    std::size_t n = 1;
    for (auto& d : shape) {
        d = read_u32(f);
        n *= d;
    }
    if (n > (std::size_t{1} << 26)) throw IoError("tensor too large in '" + p.string() + "'");
    std::vector<long long> out(n);
    for (auto& v : out) v = static_cast<std::int32_t>(read_u32(f));
    if (f.peek() != std::char_traits<char>::eof()) throw IoError("trailing bytes in '" + p.string() + "'");
    return out;
}

}  // namespace

void QuantNetwork::validate() const {
    if (layers.empty()) throw ParameterError("network has no layers");
    if (input_size == 0) throw ParameterError("network input size must be positive");
    std::size_t width = input_size;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& L = layers[l];
        if (L.in != width) throw ParameterError("layer '" + L.name + "' input size does not chain");
        if (L.out == 0) throw ParameterError("layer '" + L.name + "' has no outputs");
        if (L.weights.size() != L.in * L.out || L.bias.size() != L.out) {
            throw ParameterError("layer '" + L.name + "' tensor sizes do not match its shape");
        }
        for (int w : L.weights) {
            if (!weight_ok(precision, w)) {
                throw ParameterError("layer '" + L.name + "' weight outside the " +
                                     std::string(to_string(precision)) + " domain");
            }
        }
        const bool last = l + 1 == layers.size();
        if (last != (L.activation == Activation::None)) {
            throw ParameterError("only the last layer has no activation");
        }
        if (!last) {
            const auto want = precision == Precision::Binary ? Activation::Sign : Activation::Relu4;
            if (L.activation != want) throw ParameterError("layer '" + L.name + "' activation does not match the precision");
        }
        if (L.shift < 0 || L.shift > 30) throw ParameterError("layer shift outside [0, 30]");
        width = L.out;
    }
}

QuantNetwork load_network(const std::filesystem::path& manifest) {
    std::ifstream f(manifest);
    if (!f) throw IoError("cannot open network manifest '" + manifest.string() + "'");
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed network manifest: " + std::string(e.what()));
    }
    const auto dir = manifest.parent_path();
    QuantNetwork net;
    try {
        net.name = j.at("name").get<std::string>();
        const auto prec = j.at("precision").get<std::string>();
        if (prec == "binary") {
            net.precision = Precision::Binary;
        } else if (prec == "int4") {
            net.precision = Precision::Int4;
        } else {
            throw ParameterError("unknown precision '" + prec + "'");
        }
        net.input_size = j.at("input").at("size").get<std::size_t>();
        net.input_threshold = j.at("input").value("threshold", 0);
        for (const auto& jl : j.at("layers")) {
            QuantLayer L;
            L.name = jl.at("name").get<std::string>();
            L.in = jl.at("in").get<std::size_t>();
            L.out = jl.at("out").get<std::size_t>();
            L.activation = parse_activation(jl.at("activation").get<std::string>());
            L.shift = jl.value("shift", 0);
            std::vector<std::uint32_t> shape;
            const auto w = read_blob(dir / jl.at("weights").get<std::string>(), shape);
            if (shape.size() != 2 || shape[0] != L.out || shape[1] != L.in) {
                throw IoError("weight blob shape of '" + L.name + "' does not match [out, in]");
            }
            L.weights.resize(L.in * L.out);
            for (std::size_t o = 0; o < L.out; ++o) {
                for (std::size_t i = 0; i < L.in; ++i) {
                    L.weights[i * L.out + o] = static_cast<int>(w[o * L.in + i]);
                }
            }
            L.bias = read_blob(dir / jl.at("bias").get<std::string>(), shape);
            if (shape.size() != 1 || shape[0] != L.out) {
                throw IoError("bias blob shape of '" + L.name + "' does not match [out]");
            }
            net.layers.push_back(std::move(L));
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError("network manifest: " + std::string(e.what()));
    }
    net.validate();
    return net;
}

void save_network(const QuantNetwork& net, const std::filesystem::path& dir) {
    net.validate();
    std::filesystem::create_directories(dir);
    nlohmann::ordered_json j;
    j["name"] = net.name;
    j["precision"] = std::string(to_string(net.precision));
    j["input"] = {{"size", net.input_size}, {"threshold", net.input_threshold}};
    auto layers = nlohmann::ordered_json::array();
    for (const auto& L : net.layers) {
        const std::string wf = L.name + ".w.bin", bf = L.name + ".b.bin";
        std::vector<long long> w(L.in * L.out);
        for (std::size_t o = 0; o < L.out; ++o) {
            for (std::size_t i = 0; i < L.in; ++i) w[o * L.in + i] = L.weights[i * L.out + o];
        }
        write_blob(dir / wf, {static_cast<std::uint32_t>(L.out), static_cast<std::uint32_t>(L.in)}, w);
        write_blob(dir / bf, {static_cast<std::uint32_t>(L.out)}, L.bias);
        layers.push_back({{"name", L.name},
                          {"in", L.in},
                          {"out", L.out},
                          {"activation", std::string(to_string(L.activation))},
                          {"shift", L.shift},
                          {"weights", wf},
                          {"bias", bf}});
    }
    j["layers"] = layers;
    std::ofstream f(dir / "manifest.json", std::ios::binary);
    if (!f) throw IoError("cannot write manifest in '" + dir.string() + "'");
    f << j.dump(2) << "\n";
}

Dataset load_dataset_csv(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open dataset '" + path.string() + "'");
    Dataset d;
    std::string line;
    if (!std::getline(f, line)) throw IoError("dataset '" + path.string() + "' is empty");
    const auto width = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
    for (std::size_t lineno = 2; std::getline(f, line); ++lineno) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<int> vals;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                vals.push_back(std::stoi(cell, &used));
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw IoError("dataset line " + std::to_string(lineno) + ": bad integer '" + cell + "'");
            }
        }
        if (vals.size() < 2) throw IoError("dataset line " + std::to_string(lineno) + ": too few fields");
        if (vals.size() != width) throw IoError("dataset line " + std::to_string(lineno) + ": ragged row");
        d.labels.push_back(vals[0]);
        d.samples.emplace_back(vals.begin() + 1, vals.end());
    }
    if (d.samples.empty()) throw IoError("dataset '" + path.string() + "' has no samples");
    return d;
}

std::vector<int> encode_input(const QuantNetwork& net, std::span<const int> raw) {
    if (raw.size() != net.input_size) throw ParameterError("input length does not match the network");
    std::vector<int> x(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        x[i] = net.precision == Precision::Binary ? (raw[i] >= net.input_threshold ? 1 : -1)
                                                  : std::clamp(raw[i], 0, 15);
    }
    return x;
}

std::vector<long long> mvm_reference(std::span<const int> weights, std::span<const int> inputs,
                                     std::size_t in, std::size_t out) {
    if (weights.size() != in * out || inputs.size() != in) throw ParameterError("mvm shape mismatch");
    std::vector<long long> y(out, 0);
    for (std::size_t i = 0; i < in; ++i) {
        const long long x = inputs[i];
        if (x == 0) continue;
        for (std::size_t o = 0; o < out; ++o) y[o] += x * weights[i * out + o];
    }
    return y;
}

std::vector<int> apply_activation(const QuantLayer& L, std::span<const long long> acc) {
    std::vector<int> a(acc.size());
    for (std::size_t o = 0; o < acc.size(); ++o) {
        const long long z = acc[o] + L.bias[o];
        switch (L.activation) {
            case Activation::Sign: a[o] = z >= 0 ? 1 : -1; break;
            case Activation::Relu4: {
                // arithmetic shift: floor division for negative z
                const long long q = z >= 0 ? (z >> L.shift) : -((-z + (1LL << L.shift) - 1) >> L.shift);
                a[o] = static_cast<int>(std::clamp(q, 0LL, 15LL));
                break;
            }
            case Activation::None: throw ParameterError("apply_activation on an output layer");
        }
    }
    return a;
}

int argmax(std::span<const long long> logits) {
    if (logits.empty()) throw ParameterError("argmax of empty logits");
    return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

std::vector<long long> reference_logits(const QuantNetwork& net, std::span<const int> encoded) {
    std::vector<int> x(encoded.begin(), encoded.end());
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const auto& L = net.layers[l];
        auto acc = mvm_reference(L.weights, x, L.in, L.out);
        if (l + 1 == net.layers.size()) {
            for (std::size_t o = 0; o < L.out; ++o) acc[o] += L.bias[o];
            return acc;
        }
        x = apply_activation(L, acc);
    }
    return {};
}

std::size_t MappingPlan::row_tiles(std::size_t layer) const {
    std::size_t n = 0;
    for (const auto& t : layers.at(layer)) n = std::max(n, t.row0 / array.rows + 1);
    return n;
}

MappingPlan compile_network(const QuantNetwork& net, const CrossbarConfig& array, std::size_t pwa) {
    net.validate();
    array.validate();
    if (pwa == 0 || pwa > array.rows) throw ParameterError("pwa must be in [1, array rows]");
    MappingPlan plan;
    plan.array = array;
    plan.pwa = pwa;
    plan.mode = net.mode();
    const int planes = net.precision == Precision::Binary ? 1 : 4;
    const int filler = plan.mode == ImcMode::Xnor ? -1 : 0;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const auto& L = net.layers[l];
        std::vector<Tile> tiles;
        for (std::size_t r0 = 0; r0 < L.in; r0 += array.rows) {
            for (std::size_t c0 = 0; c0 < L.out; c0 += array.cols) {
                for (int p = 0; p < planes; ++p) {
                    Tile t;
                    t.layer = l;
                    t.row0 = r0;
                    t.rows = std::min(array.rows, L.in - r0);
                    t.col0 = c0;
                    t.cols = std::min(array.cols, L.out - c0);
                    t.plane = planes == 1 ? -1 : p;
                    t.logical.resize(t.rows * t.cols);
                    t.cells.reserve(array.rows * t.cols);
                    for (std::size_t r = 0; r < array.rows; ++r) {
                        for (std::size_t c = 0; c < t.cols; ++c) {
                            int w = filler;
                            if (r < t.rows) {
                                w = L.weights[(r0 + r) * L.out + c0 + c];
                                if (planes > 1) w = (static_cast<unsigned>(w) >> p) & 1u;
                                t.logical[r * t.cols + c] = w;
                            }
                            t.cells.push_back(map_weight(plan.mode, array.kind, w));
                        }
                    }
                    tiles.push_back(std::move(t));
                }
            }
        }
        plan.layers.push_back(std::move(tiles));
    }
    return plan;
}

namespace {

struct TileArrays {
    CrossbarArray array;
    CrossbarArray dummy;
    bool has_dummy = false;
    std::uint64_t index = 0;
};

// Sum over groups of the per-group outputs for one pass.
void accumulate_pass(const ImcResult& r, const Tile& t, const CrossbarConfig& cfg, ImcMode mode,
                     std::size_t pwa, const AdcConfig& adc, std::vector<long long>& out) {
    for (std::size_t g = 0; g < r.groups; ++g) {
        const std::size_t r0 = g * pwa;
        const std::size_t r1 = std::min(t.rows, (g + 1) * pwa);
        for (std::size_t c = 0; c < t.cols; ++c) {
            int sum_w = 0;
            for (std::size_t k = r0; k < r1; ++k) sum_w += t.logical[k * t.cols + c];
            const int code = r.n_asserted[g] == 0 ? 0 : quantize(r.i_out[g][c], adc);
            out[c] += group_output(cfg.kind, mode, code, r.n_asserted[g], sum_w);
        }
    }
}

}  // namespace

InferenceReport run_inference(const MappingPlan& plan, const QuantNetwork& net, const Dataset& data,
                              const InferenceSetup& setup) {
    net.validate();
    if (!setup.params) throw ParameterError("inference setup needs device parameters");
    if (plan.layers.size() != net.layers.size() || plan.mode != net.mode()) {
        throw ParameterError("mapping plan was not compiled for this network");
    }
    if (data.samples.size() != data.labels.size() || data.samples.empty()) {
        throw ParameterError("dataset must be labeled and nonempty");
    }
    if (setup.fidelity == Fidelity::NonIdealVariation && !setup.sigma) {
        throw ParameterError("nonideal+variation needs current sigmas");
    }

    CrossbarConfig cfg = plan.array;
    if (setup.fidelity == Fidelity::Ideal) {
        cfg.r_driver = 0.0;
        cfg.r_wire = 0.0;
        cfg.r_sink = 0.0;
    }
    AdcConfig adc = setup.adc;
    adc.is_signed = signed_output(cfg.kind, plan.mode);
    if (setup.fidelity == Fidelity::Ideal) adc.i_quant = unit_current(cfg.kind, *setup.params, cfg.v_read);
    adc.validate();

    // Static arrays for this run.
    std::vector<std::vector<TileArrays>> arrays(plan.layers.size());
    std::uint64_t tile_count = 0;
    for (std::size_t l = 0; l < plan.layers.size(); ++l) {
        for (const auto& t : plan.layers[l]) {
            CrossbarConfig tc = cfg;
            tc.cols = t.cols;
            TileArrays ta{build_array(tc, t.cells), {}, false, 0};
            if (cfg.kind == BitcellKind::OneT1MTJ) {
                ta.dummy = make_dummy_column(tc);
                ta.has_dummy = true;
            }
            ta.index = tile_count++;
            arrays[l].push_back(std::move(ta));
        }
    }

    ImcContext ctx;
    ctx.params = setup.params;
    ctx.lut = setup.lut;
    ctx.solve = setup.solve;

    const std::size_t n = setup.max_samples == 0 ? data.samples.size()
                                                 : std::min(setup.max_samples, data.samples.size());
    struct SampleOut {
        int pred = 0, ref_pred = 0;
        std::vector<long long> abs_err_sum, abs_err_max;
        std::vector<std::size_t> count;
    };
    std::vector<SampleOut> outs(n);
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex mu;
    auto work = [&] {
        for (;;) {
            const std::size_t s = next.fetch_add(1);
            if (s >= n) return;
            try {
                auto& so = outs[s];
                const auto x0 = encode_input(net, data.samples[s]);
                so.ref_pred = argmax(reference_logits(net, x0));
                std::vector<int> x = x0;
                so.abs_err_sum.assign(net.layers.size(), 0);
                so.abs_err_max.assign(net.layers.size(), 0);
                so.count.assign(net.layers.size(), 0);
                for (std::size_t l = 0; l < net.layers.size(); ++l) {
                    const auto& L = net.layers[l];
                    std::vector<long long> acc(L.out, 0);
                    for (std::size_t ti = 0; ti < plan.layers[l].size(); ++ti) {
                        const auto& t = plan.layers[l][ti];
                        const auto& ta = arrays[l][ti];
                        // Fresh current factors for every read: stream id from
                        // (sample, tile, input bit, dummy).
                        TileArrays varied;
                        auto pass = [&](const std::vector<std::uint8_t>& in, int bit) {
                            const CrossbarArray* arr = &ta.array;
                            const CrossbarArray* dummy = ta.has_dummy ? &ta.dummy : nullptr;
                            if (setup.fidelity == Fidelity::NonIdealVariation) {
                                const std::uint64_t id =
                                    ((static_cast<std::uint64_t>(s) * tile_count + ta.index) * 4 +
                                     static_cast<std::uint64_t>(bit)) * 2;
                                varied.array = ta.array;
                                apply_array_variation(varied.array, *setup.sigma, setup.seed, id);
                                arr = &varied.array;
                                if (dummy) {
                                    varied.dummy = ta.dummy;
                                    apply_array_variation(varied.dummy, *setup.sigma, setup.seed, id + 1);
                                    dummy = &varied.dummy;
                                }
                            }
                            return run_imc_column_pass(*arr, dummy, {in, plan.pwa}, plan.mode, ctx);
                        };
                        std::vector<std::uint8_t> in(cfg.rows, 0);
                        try {
                            if (t.plane < 0) {
                                for (std::size_t r = 0; r < t.rows; ++r) {
                                    in[r] = static_cast<std::uint8_t>((x[t.row0 + r] + 1) / 2);
                                }
                                const auto res = pass(in, 0);
                                std::vector<long long> part(t.cols, 0);
                                accumulate_pass(res, t, cfg, plan.mode, plan.pwa, adc, part);
                                for (std::size_t c = 0; c < t.cols; ++c) acc[t.col0 + c] += part[c];
                            } else {
                                for (int b = 0; b < 4; ++b) {
                                    for (std::size_t r = 0; r < t.rows; ++r) {
                                        in[r] = static_cast<std::uint8_t>((x[t.row0 + r] >> b) & 1);
                                    }
                                    const auto res = pass(in, b);
                                    std::vector<long long> part(t.cols, 0);
                                    accumulate_pass(res, t, cfg, plan.mode, plan.pwa, adc, part);
                                    const long long sh = 1LL << (b + t.plane);
                                    const long long sign = t.plane == 3 ? -1 : 1;
                                    for (std::size_t c = 0; c < t.cols; ++c) {
                                        acc[t.col0 + c] += sign * sh * part[c];
                                    }
                                }
                            }
                        } catch (const ConvergenceError& e) {
                            throw ConvergenceError("layer " + std::to_string(l) + " tile " +
                                                       std::to_string(ti) + ": " + e.what(),
                                                   e.last_residual(), e.trace_tail());
                        }
                    }
                    const auto ref = mvm_reference(L.weights, x, L.in, L.out);
                    for (std::size_t o = 0; o < L.out; ++o) {
                        const long long d = std::abs(acc[o] - ref[o]);
                        so.abs_err_sum[l] += d;
                        so.abs_err_max[l] = std::max(so.abs_err_max[l], d);
                    }
                    so.count[l] = L.out;
                    if (l + 1 == net.layers.size()) {
                        for (std::size_t o = 0; o < L.out; ++o) acc[o] += L.bias[o];
                        so.pred = argmax(acc);
                    } else {
                        x = apply_activation(L, acc);
                    }
                }
            } catch (...) {
                std::lock_guard lk(mu);
                if (!err) err = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    unsigned workers = setup.workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : setup.workers;
    std::vector<std::thread> pool;
    for (unsigned i = 1; i < workers && i < n; ++i) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);

    InferenceReport rep;
    rep.fidelity = setup.fidelity;
    rep.samples = n;
    rep.layers.assign(net.layers.size(), {});
    std::vector<long long> sum(net.layers.size(), 0);
    std::vector<std::size_t> cnt(net.layers.size(), 0);
    for (std::size_t s = 0; s < n; ++s) {
        const auto& so = outs[s];
        rep.predictions.push_back(so.pred);
        rep.correct += so.pred == data.labels[s] ? 1 : 0;
        rep.reference_correct += so.ref_pred == data.labels[s] ? 1 : 0;
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            sum[l] += so.abs_err_sum[l];
            cnt[l] += so.count[l];
            rep.layers[l].max_abs = std::max(rep.layers[l].max_abs, so.abs_err_max[l]);
        }
    }
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        rep.layers[l].mean_abs = cnt[l] ? static_cast<double>(sum[l]) / static_cast<double>(cnt[l]) : 0.0;
    }
    rep.accuracy = static_cast<double>(rep.correct) / static_cast<double>(n);
    rep.reference_accuracy = static_cast<double>(rep.reference_correct) / static_cast<double>(n);
    return rep;
}

std::string inference_report_json(const InferenceReport& r) {
    nlohmann::ordered_json j;
    j["fidelity"] = std::string(to_string(r.fidelity));
    j["samples"] = r.samples;
    j["correct"] = r.correct;
    j["accuracy"] = r.accuracy;
    j["reference_accuracy"] = r.reference_accuracy;
    auto layers = nlohmann::ordered_json::array();
    for (std::size_t l = 0; l < r.layers.size(); ++l) {
        layers.push_back({{"layer", l}, {"mvm_mean_abs_error", r.layers[l].mean_abs},
                          {"mvm_max_abs_error", r.layers[l].max_abs}});
    }
    j["layers"] = layers;
    return j.dump(2);
}

}  // namespace xbar
