#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xbar/adc.hpp"
#include "xbar/imc.hpp"
#include "xbar/variation.hpp"

namespace xbar {

enum class Precision { Binary, Int4 };
enum class Activation { Sign, Relu4, None };
enum class Fidelity { Ideal, NonIdeal, NonIdealVariation };

std::string_view to_string(Precision p);
std::string_view to_string(Activation a);
std::string_view to_string(Fidelity f);
Fidelity parse_fidelity(std::string_view s);

// Fully connected layer. weights[i * out + o] (input-major, one crossbar row
// per input). Sign: a = z >= 0 ? +1 : -1. Relu4: a = clamp(z >> shift, 0, 15).
struct QuantLayer {
    std::string name;
    std::size_t in = 0, out = 0;
    std::vector<int> weights;
    std::vector<long long> bias;
    Activation activation = Activation::None;
    int shift = 0;
};

// Binary networks run XNOR on +-1 data; Int4 networks run bit-sliced AND on
// unsigned 4-bit activations and signed 4-bit weights. Raw inputs are
// encoded with `input_threshold` (binary: x >= t -> +1) or clipped to
// [0, 15] (Int4).
struct QuantNetwork {
    std::string name;
    Precision precision = Precision::Binary;
    std::size_t input_size = 0;
    int input_threshold = 0;
    std::vector<QuantLayer> layers;

    ImcMode mode() const { return precision == Precision::Binary ? ImcMode::Xnor : ImcMode::And; }
    void validate() const;
};

struct Dataset {
    std::vector<std::vector<int>> samples;
    std::vector<int> labels;
};

// JSON manifest plus one blob per tensor: u32 ndim, u32 dims, int32
// elements, all little-endian. Weight blobs are [out, in].
QuantNetwork load_network(const std::filesystem::path& manifest);
void save_network(const QuantNetwork& net, const std::filesystem::path& dir);
// CSV with header "label,x0,x1,...".
Dataset load_dataset_csv(const std::filesystem::path& path);

std::vector<int> encode_input(const QuantNetwork& net, std::span<const int> raw);

// Exact integer dot products; weights[i * out + o].
std::vector<long long> mvm_reference(std::span<const int> weights, std::span<const int> inputs,
                                     std::size_t in, std::size_t out);

std::vector<int> apply_activation(const QuantLayer& layer, std::span<const long long> acc);
std::vector<long long> reference_logits(const QuantNetwork& net, std::span<const int> encoded);
int argmax(std::span<const long long> logits);

// One crossbar holding rows [row0, row0 + rows) and columns [col0, col0 +
// cols) of a layer, and one bit plane for Int4 (-1 for binary).
struct Tile {
    std::size_t layer = 0, row0 = 0, rows = 0, col0 = 0, cols = 0;
    int plane = -1;
    std::vector<CellWeight> cells;   // cfg.rows x cols, rows past `rows` padded
    std::vector<int> logical;        // rows x cols in the mode's weight domain
};

struct MappingPlan {
    CrossbarConfig array;  // geometry and electrical defaults of one crossbar
    std::size_t pwa = 8;
    ImcMode mode = ImcMode::Xnor;
    std::vector<std::vector<Tile>> layers;
    std::size_t row_tiles(std::size_t layer) const;
};

MappingPlan compile_network(const QuantNetwork& net, const CrossbarConfig& array, std::size_t pwa);

struct InferenceSetup {
    Fidelity fidelity = Fidelity::NonIdeal;
    const DeviceParams* params = nullptr;
    const BitcellLut* lut = nullptr;
    AdcConfig adc{};                       // i_quant for the non-ideal fidelities
    std::optional<CurrentSigma> sigma;     // required for NonIdealVariation
    std::uint64_t seed = 0;
    unsigned workers = 1;
    SolveOptions solve{};
    std::size_t max_samples = 0;           // 0: whole dataset
};

struct LayerError {
    double mean_abs = 0.0;
    long long max_abs = 0;
};

struct InferenceReport {
    Fidelity fidelity = Fidelity::Ideal;
    std::size_t samples = 0;
    std::size_t correct = 0;
    std::size_t reference_correct = 0;
    double accuracy = 0.0;
    double reference_accuracy = 0.0;
    std::vector<LayerError> layers;
    std::vector<int> predictions;
};

// Ideal fidelity drops the line resistances and reads with i_quant equal to
// the unit current. With variation every array read draws fresh per-cell
// factors from a substream keyed by (sample, tile, input bit).
InferenceReport run_inference(const MappingPlan& plan, const QuantNetwork& net, const Dataset& data,
                              const InferenceSetup& setup);

std::string inference_report_json(const InferenceReport& r);

}  // namespace xbar
