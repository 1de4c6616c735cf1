#pragma once

#include <map>
#include <vector>

namespace xbar {

// Analog output currents grouped by ideal integer output state.
class OutputStateHistogram {
public:
    void add(int state, double current) { bins_[state].push_back(current); }
    void merge(const OutputStateHistogram& other);
    bool has(int state) const { return bins_.count(state) != 0; }
    const std::vector<double>& currents(int state) const;
    const std::map<int, std::vector<double>>& bins() const { return bins_; }
    std::size_t size() const;

private:
    std::map<int, std::vector<double>> bins_;
};

// (min current of state a - max current of state a-1) / 2; negative on overlap.
double sense_margin(const OutputStateHistogram& h, int a);

struct WorstSm {
    double sm = 0.0;
    int state = 0;  // upper state of the worst adjacent pair
};

// Minimum over adjacent observed state pairs.
WorstSm worst_sense_margin(const OutputStateHistogram& h);

// Read-disturb margin in percent.
double rdm(double i_cr, double i_mtj);

}  // namespace xbar
