#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "xbar/device.hpp"
#include "xbar/variation.hpp"
#include "xbar/write_dynamics.hpp"

namespace xbar {

// Experiment configuration: `key = value` lines grouped under [section] or
// [section.sub] headers; '#' starts a comment. Every key has a schema entry
// with a type and default; unknown keys and ill-typed values are rejected.
// Values set later (CLI overrides) replace file values, which replace the
// defaults.
class ExperimentConfig {
public:
    enum class Type { Number, Integer, String, Bool, NumberOrAuto, NumberList, StringList };
    struct KeySpec {
        std::string key;  // "section.name"
        Type type;
        std::string default_value;
    };

    ExperimentConfig();

    static const std::vector<KeySpec>& schema();

    // Parses `text` on top of the current values; `source` labels messages.
    void parse(std::string_view text, std::string_view source = "config");
    void load_file(const std::filesystem::path& path);
    void set(std::string_view key, std::string_view value);

    const std::string& raw(std::string_view key) const;
    double number(std::string_view key) const;
    long long integer(std::string_view key) const;
    bool boolean(std::string_view key) const;
    bool is_auto(std::string_view key) const;
    std::vector<double> numbers(std::string_view key) const;
    std::vector<std::string> strings(std::string_view key) const;

    // Canonical "key = value" text of every key in schema order; the
    // FNV-1a digest skips `out` and `workers`.
    std::string canonical() const;
    std::string hash() const;

    DeviceParams device_params() const;
    VariationSpec variation_spec() const;
    WriteScheme write_scheme() const;
    std::vector<BitcellKind> kinds() const;

    // Runs every module's parameter checks; throws ConfigError naming the
    // offending block.
    void validate() const;

private:
    const KeySpec& spec(std::string_view key) const;
    std::map<std::string, std::string, std::less<>> values_;
};

// Config-file spelling of a kind: 1t1mtj, 2t2mtj, stride1, stride2.
std::string_view config_kind_name(BitcellKind k);

}  // namespace xbar
