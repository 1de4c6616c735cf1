#include "xbar/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "xbar/errors.hpp"
#include "xbar/inference.hpp"
#include "xbar/lut.hpp"
#include "xbar/report.hpp"

namespace xbar {

std::string_view config_kind_name(BitcellKind k) {
    switch (k) {
        case BitcellKind::OneT1MTJ: return "1t1mtj";
        case BitcellKind::TwoT2MTJ: return "2t2mtj";
        case BitcellKind::StrideI: return "stride1";
        case BitcellKind::StrideII: return "stride2";
    }
    return "?";
}

namespace {

using T = ExperimentConfig::Type;

std::vector<ExperimentConfig::KeySpec> build_schema() {
    std::vector<ExperimentConfig::KeySpec> s = {
        {"seed", T::Integer, "1"},
        {"workers", T::Integer, "0"},
        {"out", T::String, "out"},
    };
    const DeviceParams d;
    for (const auto& f : device_param_fields()) {
        s.push_back({std::string("device.") + f.name, T::Number, format_number(d.*(f.member))});
    }
    const std::vector<ExperimentConfig::KeySpec> rest = {
        {"crossbar.kinds", T::StringList, "1t1mtj,2t2mtj,stride1,stride2"},
        {"crossbar.rows", T::Integer, "64"},
        {"crossbar.cols", T::Integer, "64"},
        {"crossbar.r_driver", T::Number, "250"},
        {"crossbar.r_sink", T::Number, "0"},
        {"crossbar.v_wl", T::NumberOrAuto, "auto"},
        {"crossbar.pwa", T::NumberList, "8,16"},
        {"crossbar.solver_tol", T::Number, "1e-05"},
        {"crossbar.solver_max_iter", T::Integer, "5000"},
        {"crossbar.lut_step", T::Number, "0.002"},
        {"scheme.modes", T::StringList, "and,xnor"},
        {"scheme.v_write", T::Number, "1.45"},
        {"scheme.v_write_p", T::Number, "1.55"},
        {"scheme.v_write_ap", T::Number, "1.2"},
        {"scheme.dt_ns", T::Number, "0.001"},
        {"scheme.horizon_ns", T::Number, "1000"},
        {"scheme.tilt_deg", T::Number, "2"},
        {"scheme.switch_threshold", T::Number, "0.9"},
        {"scheme.energy", T::String, "worst_case"},
        {"variation.sigma_vth", T::Number, "0.025"},
        {"variation.sigma_tox_fraction", T::Number, "0.015"},
        {"variation.sigma_diameter_fraction", T::Number, "0.05"},
        {"variation.tox_decay_nm", T::Number, "0.15"},
        {"variation.trials", T::Integer, "1000"},
        {"variation.dump_samples", T::Bool, "false"},
        {"adc.loss", T::String, "mae"},
        {"adc.sweep_lo", T::Number, "0.7"},
        {"adc.sweep_hi", T::Number, "1"},
        {"adc.sweep_steps", T::Integer, "64"},
        {"adc.calibration_combos", T::Integer, "2000"},
        {"sm.combos", T::Integer, "8000"},
        {"sm.exhaustive", T::Bool, "false"},
        {"sweep.v_lo", T::Number, "0.2"},
        {"sweep.v_hi", T::Number, "1"},
        {"sweep.steps", T::Integer, "41"},
        {"inference.networks", T::StringList, "fixtures/digits_bnn/manifest.json"},
        {"inference.dataset", T::String, "fixtures/digits_test.csv"},
        {"inference.fidelities", T::StringList, "ideal,nonideal,nonideal+variation"},
        {"inference.max_samples", T::Integer, "0"},
        {"inference.pwa", T::NumberList, "16"},
    };
    s.insert(s.end(), rest.begin(), rest.end());
    for (auto k : kAllKinds) {
        const std::string base = "crossbar." + std::string(config_kind_name(k)) + ".";
        s.push_back({base + "v_read", T::NumberOrAuto, "auto"});
        s.push_back({base + "r_wire", T::NumberOrAuto, "auto"});
    }
    return s;
}

std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

bool parse_double(std::string_view s, double& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    if (*first == '+') ++first;
    auto [p, ec] = std::from_chars(first, s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size() && std::isfinite(out);
}

bool parse_ll(std::string_view s, long long& out) {
    if (s.empty()) return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream ss{std::string(s)};
    while (std::getline(ss, cur, ',')) out.push_back(trim(cur));
    return out;
}

// Canonical spelling of a value, or an error message.
std::string normalize(const ExperimentConfig::KeySpec& k, std::string_view raw, std::string& error) {
    const std::string v = trim(raw);
    switch (k.type) {
        case T::Number: {
            double d = 0.0;
            if (!parse_double(v, d)) error = "expected a number";
            return format_number(d);
        }
        case T::NumberOrAuto: {
            if (v == "auto") return v;
            double d = 0.0;
            if (!parse_double(v, d)) error = "expected a number or 'auto'";
            return format_number(d);
        }
        case T::Integer: {
            long long i = 0;
            if (!parse_ll(v, i)) error = "expected an integer";
            return std::to_string(i);
        }
        case T::Bool:
            if (v == "true" || v == "1" || v == "yes") return "true";
            if (v == "false" || v == "0" || v == "no") return "false";
            error = "expected true or false";
            return v;
        case T::String:
            if (v.empty()) error = "expected a non-empty string";
            return v;
        case T::NumberList: {
            std::string out;
            for (const auto& item : split_list(v)) {
                double d = 0.0;
                if (!parse_double(item, d)) {
                    error = "expected a comma-separated list of numbers";
                    return v;
                }
                out += (out.empty() ? "" : ",") + format_number(d);
            }
            if (out.empty()) error = "expected a non-empty list";
            return out;
        }
        case T::StringList: {
            std::string out;
            for (const auto& item : split_list(v)) {
                if (item.empty()) {
                    error = "empty list item";
                    return v;
                }
                out += (out.empty() ? "" : ",") + item;
            }
            if (out.empty()) error = "expected a non-empty list";
            return out;
        }
    }
    return v;
}

std::string unquote(const std::string& v) {
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') {
        std::string out;
        for (std::size_t i = 1; i + 1 < v.size(); ++i) {
            if (v[i] == '\\' && i + 2 < v.size()) ++i;
            out += v[i];
        }
        return out;
    }
    return v;
}

}  // namespace

const std::vector<ExperimentConfig::KeySpec>& ExperimentConfig::schema() {
    static const auto s = build_schema();
    return s;
}

ExperimentConfig::ExperimentConfig() {
    for (const auto& k : schema()) values_[k.key] = k.default_value;
}

const ExperimentConfig::KeySpec& ExperimentConfig::spec(std::string_view key) const {
    for (const auto& k : schema()) {
        if (k.key == key) return k;
    }
    throw ConfigError("unknown key '" + std::string(key) + "'");
}

void ExperimentConfig::set(std::string_view key, std::string_view value) {
    const auto& k = spec(key);
    std::string err;
    auto v = normalize(k, unquote(trim(value)), err);
    if (!err.empty()) throw ConfigError("key '" + k.key + "': " + err + " (got '" + std::string(value) + "')");
    values_[k.key] = std::move(v);
}

void ExperimentConfig::parse(std::string_view text, std::string_view source) {
    std::string section;
    std::stringstream ss{std::string(text)};
    std::string line;
    for (int lineno = 1; std::getline(ss, line); ++lineno) {
        const std::string where = std::string(source) + ":" + std::to_string(lineno) + ": ";
        // strip comments outside quotes
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (!quoted && line[i] == '#') {
                line.resize(i);
                break;
            }
        }
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw ConfigError(where + "unterminated section header");
            section = trim(std::string_view(t).substr(1, t.size() - 2));
            const bool ok = !section.empty() &&
                            std::all_of(section.begin(), section.end(), [](char c) {
                                return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
                            });
            if (!ok) throw ConfigError(where + "bad section name '" + section + "'");
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
        const std::string name = trim(std::string_view(t).substr(0, eq));
        if (name.empty()) throw ConfigError(where + "missing key name");
        const std::string key = section.empty() ? name : section + "." + name;
        try {
            set(key, std::string_view(t).substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }
}

void ExperimentConfig::load_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config '" + path.string() + "'");
    std::stringstream buf;
    buf << f.rdbuf();
    parse(buf.str(), path.string());
}

const std::string& ExperimentConfig::raw(std::string_view key) const {
    spec(key);
    return values_.find(key)->second;
}

double ExperimentConfig::number(std::string_view key) const {
    double d = 0.0;
    if (!parse_double(raw(key), d)) throw ConfigError("key '" + std::string(key) + "' is not numeric");
    return d;
}

long long ExperimentConfig::integer(std::string_view key) const {
    long long i = 0;
    if (!parse_ll(raw(key), i)) throw ConfigError("key '" + std::string(key) + "' is not an integer");
    return i;
}

bool ExperimentConfig::boolean(std::string_view key) const { return raw(key) == "true"; }

bool ExperimentConfig::is_auto(std::string_view key) const { return raw(key) == "auto"; }

std::vector<double> ExperimentConfig::numbers(std::string_view key) const {
    std::vector<double> out;
    for (const auto& s : split_list(raw(key))) {
        double d = 0.0;
        parse_double(s, d);
        out.push_back(d);
    }
    return out;
}

std::vector<std::string> ExperimentConfig::strings(std::string_view key) const {
    return split_list(raw(key));
}

std::string ExperimentConfig::canonical() const {
    std::string out;
    for (const auto& k : schema()) out += k.key + " = " + values_.find(k.key)->second + "\n";
    return out;
}

std::string ExperimentConfig::hash() const {
    // output location and thread count do not change results
    std::string text;
    for (const auto& k : schema()) {
        if (k.key == "out" || k.key == "workers") continue;
        text += k.key + " = " + values_.find(k.key)->second + "\n";
    }
    return hex64(fnv1a64(text));
}

DeviceParams ExperimentConfig::device_params() const {
    DeviceParams p;
    for (const auto& f : device_param_fields()) p.*(f.member) = number(std::string("device.") + f.name);
    return p;
}

VariationSpec ExperimentConfig::variation_spec() const {
    VariationSpec v;
    v.sigma_vth = number("variation.sigma_vth");
    v.sigma_tox_fraction = number("variation.sigma_tox_fraction");
    v.sigma_diameter_fraction = number("variation.sigma_diameter_fraction");
    v.tox_decay_nm = number("variation.tox_decay_nm");
    return v;
}

WriteScheme ExperimentConfig::write_scheme() const {
    WriteScheme w;
    w.v_write = number("scheme.v_write");
    w.v_write_p = number("scheme.v_write_p");
    w.v_write_ap = number("scheme.v_write_ap");
    w.llgs.dt_ns = number("scheme.dt_ns");
    w.llgs.horizon_ns = number("scheme.horizon_ns");
    w.llgs.tilt_deg = number("scheme.tilt_deg");
    w.llgs.switch_threshold = number("scheme.switch_threshold");
    const auto& e = raw("scheme.energy");
    if (e == "worst_case") {
        w.energy = WriteEnergy::WorstCase;
    } else if (e == "fixed_pulse") {
        w.energy = WriteEnergy::FixedPulse;
    } else if (e == "until_switched") {
        w.energy = WriteEnergy::UntilSwitched;
    } else {
        throw ConfigError("key 'scheme.energy': expected worst_case, fixed_pulse or until_switched");
    }
    return w;
}

std::vector<BitcellKind> ExperimentConfig::kinds() const {
    std::vector<BitcellKind> out;
    for (const auto& s : strings("crossbar.kinds")) {
        try {
            out.push_back(parse_kind(s));
        } catch (const ParameterError&) {
            throw ConfigError("key 'crossbar.kinds': unknown bitcell kind '" + s + "'");
        }
    }
    return out;
}

void ExperimentConfig::validate() const {
    auto block = [](const char* name, auto&& fn) {
        try {
            fn();
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(std::string("[") + name + "] " + e.what());
        }
    };
    block("device", [&] { device_params().validate(); });
    block("crossbar", [&] {
        kinds();
        const auto rows = integer("crossbar.rows");
        if (rows < 1 || rows > 4096 || integer("crossbar.cols") < 1 || integer("crossbar.cols") > 4096) {
            throw ConfigError("[crossbar] rows and cols must be in [1, 4096]");
        }
        for (const char* key : {"crossbar.pwa", "inference.pwa"}) {
            for (double p : numbers(key)) {
                if (p != static_cast<double>(static_cast<long long>(p)) || p < 1 || p > static_cast<double>(rows)) {
                    throw ConfigError(std::string("key '") + key + "': pwa must be an integer in [1, rows]");
                }
            }
        }
        if (number("crossbar.r_driver") < 0 || number("crossbar.r_sink") < 0) {
            throw ConfigError("[crossbar] resistances must be >= 0");
        }
        if (!(number("crossbar.solver_tol") > 0) || integer("crossbar.solver_max_iter") < 1 ||
            !(number("crossbar.lut_step") > 0)) {
            throw ConfigError("[crossbar] solver_tol, solver_max_iter and lut_step must be positive");
        }
        for (auto k : kAllKinds) {
            const std::string base = "crossbar." + std::string(config_kind_name(k)) + ".";
            if (!is_auto(base + "v_read") && !(number(base + "v_read") > 0)) {
                throw ConfigError("key '" + base + "v_read' must be positive");
            }
            if (!is_auto(base + "r_wire") && number(base + "r_wire") < 0) {
                throw ConfigError("key '" + base + "r_wire' must be >= 0");
            }
        }
    });
    block("scheme", [&] {
        for (const auto& m : strings("scheme.modes")) {
            if (m != "and" && m != "xnor") throw ConfigError("key 'scheme.modes': expected and/xnor, got '" + m + "'");
        }
        const auto w = write_scheme();
        if (!(w.llgs.dt_ns > 0) || w.llgs.dt_ns > 1e-3 || !(w.llgs.horizon_ns > 0)) {
            throw ConfigError("[scheme] dt_ns must be in (0, 0.001] and horizon_ns > 0");
        }
        if (!(w.v_write > 0) || !(w.v_write_p > 0) || !(w.v_write_ap > 0)) {
            throw ConfigError("[scheme] write voltages must be positive");
        }
    });
    block("variation", [&] {
        variation_spec().validate();
        if (integer("variation.trials") < 2) throw ConfigError("[variation] trials must be >= 2");
    });
    block("adc", [&] {
        const auto& l = raw("adc.loss");
        if (l != "mae" && l != "mse") throw ConfigError("key 'adc.loss': expected mae or mse");
        if (!(number("adc.sweep_lo") > 0) || number("adc.sweep_hi") < number("adc.sweep_lo") ||
            integer("adc.sweep_steps") < 1 || integer("adc.calibration_combos") < 1) {
            throw ConfigError("[adc] sweep range must satisfy 0 < lo <= hi with >= 1 step and >= 1 combo");
        }
    });
    block("sm", [&] {
        if (integer("sm.combos") < 1) throw ConfigError("key 'sm.combos' must be >= 1");
    });
    block("sweep", [&] {
        if (!(number("sweep.v_lo") >= 0) || !(number("sweep.v_hi") > number("sweep.v_lo")) ||
            integer("sweep.steps") < 2) {
            throw ConfigError("[sweep] need 0 <= v_lo < v_hi and steps >= 2");
        }
    });
    block("inference", [&] {
        for (const auto& f : strings("inference.fidelities")) parse_fidelity(f);
        if (integer("inference.max_samples") < 0) throw ConfigError("key 'inference.max_samples' must be >= 0");
    });
    if (integer("seed") < 0) throw ConfigError("key 'seed' must be >= 0");
    if (integer("workers") < 0) throw ConfigError("key 'workers' must be >= 0");
}

}  // namespace xbar
