#include "xbar/metrics.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "xbar/errors.hpp"

namespace xbar {

void OutputStateHistogram::merge(const OutputStateHistogram& other) {
    for (const auto& [s, v] : other.bins_) {
        auto& dst = bins_[s];
        dst.insert(dst.end(), v.begin(), v.end());
    }
}

const std::vector<double>& OutputStateHistogram::currents(int state) const {
    auto it = bins_.find(state);
    if (it == bins_.end()) throw ParameterError("output state " + std::to_string(state) + " not present");
    return it->second;
}

std::size_t OutputStateHistogram::size() const {
    std::size_t n = 0;
    for (const auto& [s, v] : bins_) n += v.size();
    return n;
}

double sense_margin(const OutputStateHistogram& h, int a) {
    const auto& hi = h.currents(a);
    const auto& lo = h.currents(a - 1);
    if (hi.empty() || lo.empty()) throw ParameterError("empty output state");
    return (*std::min_element(hi.begin(), hi.end()) - *std::max_element(lo.begin(), lo.end())) / 2.0;
}

WorstSm worst_sense_margin(const OutputStateHistogram& h) {
    WorstSm w{std::numeric_limits<double>::infinity(), 0};
    bool any = false;
    for (const auto& [s, v] : h.bins()) {
        if (!h.has(s - 1)) continue;
        const double sm = sense_margin(h, s);
        if (!any || sm < w.sm) w = {sm, s};
        any = true;
    }
    if (!any) throw ParameterError("histogram has no adjacent output states");
    return w;
}

double rdm(double i_cr, double i_mtj) {
    if (!(i_cr > 0.0)) throw ParameterError("rdm requires a positive critical current");
    if (!(i_mtj >= 0.0)) throw ParameterError("rdm takes the MTJ current magnitude (>= 0)");
    return (i_cr - i_mtj) / i_cr * 100.0;
}

}  // namespace xbar
