#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "doctest.h"
#include "json.hpp"
#include "xbar/config.hpp"
#include "xbar/errors.hpp"
#include "xbar/report.hpp"

using namespace xbar;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

struct Run {
    int code;
    std::string out, err;
};

Run run_cli(const std::string& cmd, cli::RunOptions o) {
    std::ostringstream out, err;
    const int c = cli::run(cmd, o, out, err);
    return {c, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / name;
    fs::remove_all(d);
    return d;
}

}  // namespace

TEST_CASE("config defaults and typed accessors") {
    ExperimentConfig c;
    CHECK(c.integer("seed") == 1);
    CHECK(c.is_auto("crossbar.v_wl"));
    CHECK(c.number("crossbar.r_driver") == 250.0);
    CHECK(c.numbers("crossbar.pwa") == std::vector<double>{8, 16});
    CHECK(c.kinds().size() == 4);
    CHECK_FALSE(c.boolean("sm.exhaustive"));
    CHECK(c.device_params().r_p_ohm == DeviceParams{}.r_p_ohm);
    CHECK_NOTHROW(c.validate());
    CHECK(config_kind_name(BitcellKind::StrideII) == "stride2");
}

TEST_CASE("config sections, comments, quoting and precedence") {
    ExperimentConfig c;
    c.parse("seed = 7\n"
            "[device]\n"
            "r_p_ohm = 5000   # calibrated\n"
            "\n"
            "[crossbar.stride1]\n"
            "v_read = 0.7\n"
            "[inference]\n"
            "dataset = \"data/a#b.csv\"\n",
            "t.cfg");
    CHECK(c.integer("seed") == 7);
    CHECK(c.number("device.r_p_ohm") == 5000.0);
    CHECK(c.number("crossbar.stride1.v_read") == 0.7);
    CHECK(c.raw("inference.dataset") == "data/a#b.csv");
    c.set("device.r_p_ohm", "6000");  // later (command line) wins
    CHECK(c.device_params().r_p_ohm == 6000.0);
}

TEST_CASE("config errors name the key and the line") {
    ExperimentConfig c;
    try {
        c.parse("[device]\nr_p_ohm = 1\nbogus = 2\n", "x.cfg");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string m = e.what();
        CHECK(m.find("x.cfg:3") != std::string::npos);
        CHECK(m.find("device.bogus") != std::string::npos);
    }
    CHECK_THROWS_AS(c.set("crossbar.rows", "many"), ConfigError);
    CHECK_THROWS_AS(c.set("sm.exhaustive", "perhaps"), ConfigError);
    CHECK_THROWS_AS(c.parse("[device\n", "y.cfg"), ConfigError);
    CHECK_THROWS_AS(c.parse("just words\n", "y.cfg"), ConfigError);
    CHECK_THROWS_AS(c.load_file("/nonexistent/dir/z.cfg"), IoError);
}

TEST_CASE("config validation reports the failing block") {
    ExperimentConfig c;
    c.set("crossbar.rows", "0");
    try {
        c.validate();
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("[crossbar]") != std::string::npos);
    }
    ExperimentConfig v;
    v.set("variation.sigma_vth", "-1");
    CHECK_THROWS_AS(v.validate(), ConfigError);
    ExperimentConfig k;
    k.set("crossbar.kinds", "stride1,3t3mtj");
    CHECK_THROWS_AS(k.validate(), ConfigError);
}

TEST_CASE("config hash: stable, sensitive to results-relevant keys only") {
    ExperimentConfig a, b;
    CHECK(a.hash() == b.hash());
    CHECK(a.hash().size() == 16);
    b.set("out", "elsewhere");
    b.set("workers", "3");
    CHECK(a.hash() == b.hash());
    b.set("device.tmr", "4.0");
    CHECK(a.hash() != b.hash());
    const auto canon = a.canonical();
    for (const auto& k : ExperimentConfig::schema()) CHECK(canon.find(k.key + " = ") != std::string::npos);
}

TEST_CASE("CSV quoting and number text") {
    CHECK(csv_field("plain") == "plain");
    CHECK(csv_field("a,b") == "\"a,b\"");
    CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
    CHECK(csv_field("two\nlines") == "\"two\nlines\"");
    for (double v : {0.1, 1e-9, 72.35561051044374, -3.0, 123456789.0}) CHECK(std::stod(format_number(v)) == v);
    std::ostringstream os;
    CsvWriter w(os);
    w.row({"a", "b"});
    w.cell("x,y").cell(1.5).cell(2LL);
    w.end_row();
    CHECK(os.str() == "a,b\r\n\"x,y\",1.5,2\r\n");
}

TEST_CASE("rdm command: report row, envelope, overwrite protection, byte-identical rerun") {
    const auto dir = fresh_dir("xbar_cli_rdm");
    cli::RunOptions o;
    o.out = dir.string();
    o.seed = 5;
    const auto r = run_cli("rdm", o);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("rdm:") == 0);
    CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 1);
    const auto csv = slurp(dir / "rdm.csv");
    CHECK(csv.rfind("design,", 0) == 0);
    CHECK(csv.find("1t1mtj,") != std::string::npos);
    const auto j = nlohmann::ordered_json::parse(slurp(dir / "rdm.json"));
    std::vector<std::string> keys;
    for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
    CHECK(keys == std::vector<std::string>{"tool", "version", "command", "config_hash", "seed", "results"});
    CHECK(j["seed"] == 5);
    CHECK(j["version"] == std::string(tool_version()));
    CHECK(j["results"][0]["design"] == "1t1mtj");
    CHECK(j["results"][0]["rdm_percent"].get<double>() == doctest::Approx(72.35).epsilon(1e-3));

    const auto again = run_cli("rdm", o);
    CHECK(again.code == cli::kIo);
    CHECK(again.err.find("--force") != std::string::npos);
    const auto before = slurp(dir / "rdm.json");
    o.force = true;
    CHECK(run_cli("rdm", o).code == 0);
    CHECK(slurp(dir / "rdm.json") == before);
    fs::remove_all(dir);
}

TEST_CASE("exit codes for configuration, I/O and non-convergence failures") {
    const auto dir = fresh_dir("xbar_cli_err");
    cli::RunOptions o;
    o.out = dir.string();
    o.overrides = {"device.nonsense=1"};
    auto r = run_cli("rdm", o);
    CHECK(r.code == cli::kConfig);
    CHECK(r.err.find("device.nonsense") != std::string::npos);

    o.overrides = {"no_equals_sign"};
    CHECK(run_cli("rdm", o).code == cli::kConfig);

    o.overrides = {};
    o.config = dir / "missing.cfg";
    CHECK(run_cli("rdm", o).code == cli::kIo);

    fs::create_directories(dir);
    {
        std::ofstream f(dir / "bad.cfg");
        f << "[crossbar]\nrows = -4\n";
    }
    o.config = dir / "bad.cfg";
    CHECK(run_cli("rdm", o).code == cli::kConfig);

    o.config.reset();
    o.overrides = {"inference.dataset=" + (dir / "nope.csv").string()};
    CHECK(run_cli("infer", o).code == cli::kIo);

    o.overrides = {"crossbar.kinds=stride1", "crossbar.pwa=8", "scheme.modes=and", "sm.combos=64",
                   "crossbar.solver_max_iter=1", "crossbar.solver_tol=1e-15"};
    CHECK(run_cli("sm", o).code == cli::kNonConvergence);

    CHECK(run_cli("frobnicate", o).code == cli::kConfig);
    fs::remove_all(dir);
}

TEST_CASE("gen-lut regenerates byte-identical tables") {
    const auto d1 = fresh_dir("xbar_cli_lut1"), d2 = fresh_dir("xbar_cli_lut2");
    cli::RunOptions o;
    o.overrides = {"crossbar.kinds=1t1mtj,stride2", "crossbar.lut_step=0.01"};
    o.out = d1.string();
    REQUIRE(run_cli("gen-lut", o).code == 0);
    o.out = d2.string();
    o.workers = 2;
    REQUIRE(run_cli("gen-lut", o).code == 0);
    for (const char* f : {"lut_1t1mtj.lut", "lut_stride2.lut", "gen-lut.json"})
        CHECK(slurp(d1 / f) == slurp(d2 / f));
    const auto lut = BitcellLut::load(d1 / "lut_stride2.lut");
    CHECK(lut.kind() == BitcellKind::StrideII);
    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST_CASE("sm command: pwa 16 never beats pwa 8 for any design") {
    const auto dir = fresh_dir("xbar_cli_sm");
    cli::RunOptions o;
    o.out = dir.string();
    o.overrides = {"sm.combos=256", "scheme.modes=and"};
    REQUIRE(run_cli("sm", o).code == 0);
    const auto j = nlohmann::json::parse(slurp(dir / "sm.json"));
    std::map<std::string, std::map<int, double>> sm;
    for (const auto& e : j["results"]) sm[e["design"]][e["pwa"]] = e["worst_sm"];
    CHECK(sm.size() == 4);
    for (const auto& [d, v] : sm) CHECK(v.at(16) <= v.at(8));
    fs::remove_all(dir);
}

TEST_CASE("config file drives the run and CLI flags override it") {
    const auto dir = fresh_dir("xbar_cli_cfg");
    fs::create_directories(dir);
    {
        std::ofstream f(dir / "exp.cfg");
        f << "seed = 3\nout = \"" << (dir / "from_file").string() << "\"\n[crossbar]\nkinds = stride1\n";
    }
    cli::RunOptions o;
    o.config = dir / "exp.cfg";
    REQUIRE(run_cli("rdm", o).code == 0);
    auto j = nlohmann::json::parse(slurp(dir / "from_file" / "rdm.json"));
    CHECK(j["seed"] == 3);
    CHECK(j["results"].size() == 1);
    o.seed = 11;
    o.out = (dir / "from_flag").string();
    REQUIRE(run_cli("rdm", o).code == 0);
    j = nlohmann::json::parse(slurp(dir / "from_flag" / "rdm.json"));
    CHECK(j["seed"] == 11);
    fs::remove_all(dir);
}

TEST_CASE("subcommand table") {
    CHECK(cli::subcommands() == std::vector<std::string>{"gen-lut", "sweep-vread", "sm", "rdm", "montecarlo",
                                                         "infer", "write-sim"});
}
