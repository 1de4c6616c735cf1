#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace xbar::cli {

enum ExitCode { kOk = 0, kInternal = 1, kConfig = 2, kNonConvergence = 3, kIo = 4 };

struct RunOptions {
    std::optional<std::filesystem::path> config;
    std::optional<long long> seed;
    std::optional<long long> workers;
    std::optional<std::string> out;
    bool force = false;
    std::vector<std::string> overrides;  // "section.key=value"
};

const std::vector<std::string>& subcommands();

// Runs one subcommand; diagnostics go to `err`, the one-line summary to
// `out`. Returns the process exit code.
int run(const std::string& subcommand, const RunOptions& opt, std::ostream& out, std::ostream& err);

}  // namespace xbar::cli
