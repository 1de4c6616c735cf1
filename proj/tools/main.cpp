#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "xbar/report.hpp"

int main(int argc, char** argv) {
    using namespace xbar::cli;
    CLI::App app{"STT-MRAM in-memory-computing crossbar simulator"};
    app.set_version_flag("--version", std::string(xbar::tool_version()));
    app.require_subcommand(1, 1);

    RunOptions opt;
    std::string config;
    long long seed = 0, workers = 0;
    std::string out;
    std::string chosen;
    const std::map<std::string, std::string> blurb = {
        {"gen-lut", "build and save bitcell current lookup tables"},
        {"sweep-vread", "I_H / I_L ratio against the read voltage"},
        {"sm", "worst-case sense margin per design, scheme and PWA"},
        {"rdm", "read-disturb margin at the operating point"},
        {"montecarlo", "bitcell current spread under process variation"},
        {"infer", "quantized network accuracy on the crossbar"},
        {"write-sim", "LLGS write latency and energy"},
    };
    for (const auto& name : subcommands()) {
        const auto b = blurb.find(name);
        auto* sub = app.add_subcommand(name, b == blurb.end() ? std::string() : b->second);
        sub->add_option("--config", config, "experiment config file");
        sub->add_option("--seed", seed, "master RNG seed (overrides the config)");
        sub->add_option("--workers", workers, "worker threads, 0 = all cores (overrides the config)");
        sub->add_option("--out", out, "output directory (overrides the config)");
        sub->add_flag("--force", opt.force, "overwrite existing outputs");
        sub->add_option("--set", opt.overrides, "override one config key: section.key=value");
        sub->callback([&chosen, name] { chosen = name; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }
    for (auto* sub : app.get_subcommands()) {
        if (!config.empty()) opt.config = config;
        if (sub->count("--seed")) opt.seed = seed;
        if (sub->count("--workers")) opt.workers = workers;
        if (sub->count("--out")) opt.out = out;
    }
    return run(chosen, opt, std::cout, std::cerr);
}
