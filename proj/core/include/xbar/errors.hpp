#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace xbar {

// Invalid physical or configuration parameter (value outside its domain).
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Iterative solver failed to converge. Carries the last residual and,
// for the array solver, the tail of the update history.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double last_residual,
                     std::vector<double> trace_tail = {})
        : std::runtime_error(what), last_residual_(last_residual),
          trace_tail_(std::move(trace_tail)) {}

    double last_residual() const noexcept { return last_residual_; }
    const std::vector<double>& trace_tail() const noexcept { return trace_tail_; }

private:
    double last_residual_;
    std::vector<double> trace_tail_;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace xbar
