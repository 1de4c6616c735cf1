#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "xbar/errors.hpp"
#include "xbar/inference.hpp"

using namespace xbar;
namespace fs = std::filesystem;

namespace {

QuantNetwork random_net(Precision prec, std::vector<std::size_t> widths, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    QuantNetwork n;
    n.name = "t";
    n.precision = prec;
    n.input_size = widths.front();
    n.input_threshold = 8;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        QuantLayer L;
        L.name = "fc" + std::to_string(l);
        L.in = widths[l];
        L.out = widths[l + 1];
        L.weights.resize(L.in * L.out);
        for (auto& w : L.weights)
            w = prec == Precision::Binary ? (rng() & 1 ? 1 : -1) : static_cast<int>(rng() % 16) - 8;
        L.bias.assign(L.out, 0);
        const bool last = l + 2 == widths.size();
        L.activation = last ? Activation::None : (prec == Precision::Binary ? Activation::Sign : Activation::Relu4);
        L.shift = prec == Precision::Int4 && !last ? 4 : 0;
        n.layers.push_back(L);
    }
    return n;
}

Dataset make_dataset(std::size_t n, std::size_t width, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Dataset d;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<int> x(width);
        for (auto& v : x) v = static_cast<int>(rng() % 17);
        d.samples.push_back(x);
        d.labels.push_back(static_cast<int>(rng() % 4));
    }
    return d;
}

CrossbarConfig array_for(BitcellKind k) { return default_crossbar_config(k, DeviceParams{}); }

}  // namespace

TEST_CASE("mvm_reference small cases and a second independent loop") {
    CHECK(mvm_reference(std::vector<int>(8, 1), std::vector<int>(8, 1), 8, 1)[0] == 8);
    CHECK(mvm_reference(std::vector<int>{3, -2}, std::vector<int>{1, 2}, 2, 1)[0] == -1);
    std::mt19937_64 rng(1);
    std::vector<int> w(64 * 5), x(64);
    for (auto& v : w) v = static_cast<int>(rng() % 16) - 8;
    for (auto& v : x) v = static_cast<int>(rng() % 16);
    const auto y = mvm_reference(w, x, 64, 5);
    for (std::size_t o = 0; o < 5; ++o) {
        long long acc = 0;
        for (std::size_t i = 64; i-- > 0;) acc += static_cast<long long>(w[i * 5 + o]) * x[i];
        CHECK(y[o] == acc);
    }
    CHECK_THROWS_AS(mvm_reference(w, x, 64, 4), ParameterError);
}

TEST_CASE("activations and input encoding") {
    QuantLayer L;
    L.bias = {0, 0, 0, 0};
    L.activation = Activation::Relu4;
    L.shift = 2;
    const std::vector<long long> acc{-1, 7, 100, 8};
    CHECK(apply_activation(L, acc) == std::vector<int>{0, 1, 15, 2});
    L.activation = Activation::Sign;
    CHECK(apply_activation(L, std::vector<long long>{-1, 0, 3, -9}) == std::vector<int>{-1, 1, 1, -1});
    L.activation = Activation::None;
    CHECK_THROWS_AS(apply_activation(L, acc), ParameterError);

    auto n = random_net(Precision::Binary, {4, 2}, 1);
    n.input_threshold = 5;
    CHECK(encode_input(n, std::vector<int>{0, 5, 9, 4}) == std::vector<int>{-1, 1, 1, -1});
    n.precision = Precision::Int4;
    CHECK(encode_input(n, std::vector<int>{-3, 5, 16, 4}) == std::vector<int>{0, 5, 15, 4});
    CHECK_THROWS_AS(encode_input(n, std::vector<int>{1}), ParameterError);
    CHECK(argmax(std::vector<long long>{1, 5, 5, 2}) == 1);
    CHECK(to_string(parse_fidelity("nonideal+variation")) == "nonideal+variation");
    CHECK_THROWS_AS(parse_fidelity("perfect"), ParameterError);
}

TEST_CASE("network validation") {
    auto n = random_net(Precision::Binary, {8, 4, 2}, 2);
    CHECK_NOTHROW(n.validate());
    n.layers[1].in = 5;
    CHECK_THROWS_AS(n.validate(), ParameterError);
    n = random_net(Precision::Binary, {8, 4}, 2);
    n.layers[0].weights[0] = 0;
    CHECK_THROWS_AS(n.validate(), ParameterError);
    n = random_net(Precision::Int4, {8, 4}, 2);
    n.layers[0].weights[0] = 9;
    CHECK_THROWS_AS(n.validate(), ParameterError);
}

TEST_CASE("compile_network tiling") {
    const auto a = array_for(BitcellKind::StrideI);
    CHECK(compile_network(random_net(Precision::Binary, {64, 64}, 1), a, 8).layers[0].size() == 1);
    const auto p130 = compile_network(random_net(Precision::Binary, {130, 10}, 1), a, 8);
    CHECK(p130.layers[0].size() == 3);
    CHECK(p130.row_tiles(0) == 3);
    CHECK(p130.layers[0][2].rows == 2);
    const auto p4 = compile_network(random_net(Precision::Int4, {64, 64}, 1), a, 16);
    CHECK(p4.layers[0].size() == 4);
    CHECK(p4.mode == ImcMode::And);
    for (int b = 0; b < 4; ++b) CHECK(p4.layers[0][static_cast<std::size_t>(b)].plane == b);
    CHECK_THROWS_AS(compile_network(random_net(Precision::Binary, {64, 64}, 1), a, 0), ParameterError);
}

TEST_CASE("ideal fidelity reproduces the integer reference exactly") {
    const DeviceParams p;
    for (auto prec : {Precision::Binary, Precision::Int4}) {
        for (auto k : {BitcellKind::OneT1MTJ, BitcellKind::StrideII}) {
            const auto net = random_net(prec, {70, 12, 4}, 3);
            const auto data = make_dataset(6, 70, 4);
            const auto plan = compile_network(net, array_for(k), 16);
            InferenceSetup su;
            su.fidelity = Fidelity::Ideal;
            su.params = &p;
            su.adc.bits = 4;
            const auto r = run_inference(plan, net, data, su);
            CHECK(r.accuracy == r.reference_accuracy);
            for (std::size_t s = 0; s < data.samples.size(); ++s)
                CHECK(r.predictions[s] == argmax(reference_logits(net, encode_input(net, data.samples[s]))));
            for (const auto& e : r.layers) CHECK(e.max_abs == 0);
        }
    }
}

TEST_CASE("nonideal fidelity without parasitics equals ideal on a single 8x8 layer") {
    const DeviceParams p;
    const auto net = random_net(Precision::Binary, {8, 8}, 5);
    const auto data = make_dataset(16, 8, 6);
    auto a = array_for(BitcellKind::StrideI);
    a.r_driver = 0.0;
    a.r_wire = 0.0;
    const auto plan = compile_network(net, a, 8);
    InferenceSetup su;
    su.params = &p;
    su.adc.bits = 3;
    su.adc.i_quant = unit_current(a.kind, p, a.v_read);
    su.fidelity = Fidelity::NonIdeal;
    const auto n = run_inference(plan, net, data, su);
    su.fidelity = Fidelity::Ideal;
    const auto i = run_inference(plan, net, data, su);
    CHECK(n.predictions == i.predictions);
    CHECK(n.layers[0].max_abs == 0);
}

TEST_CASE("run_inference preconditions and sample cap") {
    const DeviceParams p;
    const auto net = random_net(Precision::Binary, {8, 4}, 5);
    const auto data = make_dataset(10, 8, 6);
    const auto plan = compile_network(net, array_for(BitcellKind::StrideI), 8);
    InferenceSetup su;
    su.params = &p;
    su.fidelity = Fidelity::NonIdealVariation;
    CHECK_THROWS_AS(run_inference(plan, net, data, su), ParameterError);
    su.fidelity = Fidelity::Ideal;
    su.max_samples = 3;
    CHECK(run_inference(plan, net, data, su).samples == 3);
    su.params = nullptr;
    CHECK_THROWS_AS(run_inference(plan, net, data, su), ParameterError);
    const auto other = random_net(Precision::Int4, {8, 4}, 5);
    su.params = &p;
    CHECK_THROWS_AS(run_inference(plan, other, data, su), ParameterError);
}

TEST_CASE("network and dataset files round trip; malformed files are I/O errors") {
    const auto dir = fs::temp_directory_path() / "xbar_unit_net";
    fs::remove_all(dir);
    auto net = random_net(Precision::Int4, {10, 6, 3}, 8);
    net.layers[0].bias = {1, -2, 3, 0, 5, -6};
    save_network(net, dir);
    const auto back = load_network(dir / "manifest.json");
    CHECK(back.name == net.name);
    REQUIRE(back.layers.size() == 2);
    CHECK(back.layers[0].weights == net.layers[0].weights);
    CHECK(back.layers[0].bias == net.layers[0].bias);
    CHECK(back.layers[0].shift == 4);
    CHECK_THROWS_AS(load_network(dir / "missing.json"), IoError);
    {
        std::ofstream f(dir / "bad.json");
        f << "{ not json";
    }
    CHECK_THROWS_AS(load_network(dir / "bad.json"), IoError);

    {
        std::ofstream f(dir / "d.csv", std::ios::binary);
        f << "label,x0,x1\r\n1,2,3\r\n0,4,5\r\n";
    }
    const auto d = load_dataset_csv(dir / "d.csv");
    CHECK(d.labels == std::vector<int>{1, 0});
    CHECK(d.samples[1] == std::vector<int>{4, 5});
    {
        std::ofstream f(dir / "r.csv");
        f << "label,x0,x1\n1,2\n";
    }
    CHECK_THROWS_AS(load_dataset_csv(dir / "r.csv"), IoError);
    {
        std::ofstream f(dir / "n.csv");
        f << "label,x0\n1,abc\n";
    }
    CHECK_THROWS_AS(load_dataset_csv(dir / "n.csv"), IoError);
    fs::remove_all(dir);
}

TEST_CASE("shipped fixtures load and the reference accuracy is recorded") {
    const fs::path root = XBAR_SOURCE_DIR;
    const auto data = load_dataset_csv(root / "fixtures/digits_test.csv");
    CHECK(data.samples.size() == 450);
    for (const char* m : {"fixtures/digits_bnn/manifest.json", "fixtures/digits_int4/manifest.json"}) {
        const auto net = load_network(root / m);
        std::size_t ok = 0;
        for (std::size_t s = 0; s < data.samples.size(); ++s)
            ok += argmax(reference_logits(net, encode_input(net, data.samples[s]))) == data.labels[s];
        CHECK(static_cast<double>(ok) / data.samples.size() > 0.9);
    }
}

TEST_CASE("report JSON carries the accuracies") {
    InferenceReport r;
    r.samples = 4;
    r.correct = 3;
    r.accuracy = 0.75;
    r.layers.push_back({0.5, 2});
    const auto j = inference_report_json(r);
    CHECK(j.find("\"accuracy\"") != std::string::npos);
    CHECK(j.find("0.75") != std::string::npos);
}
