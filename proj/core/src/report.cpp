#include "xbar/report.hpp"

#include <charconv>
#include <cmath>

namespace xbar {

std::string_view tool_version() { return XBAR_VERSION; }


std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) return "0";
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

CsvWriter& CsvWriter::cell(std::string_view s) {
    if (!first_) os_ << ',';
    os_ << csv_field(s);
    first_ = false;
    return *this;
}

CsvWriter& CsvWriter::cell(double v) { return cell(std::string_view(format_number(v))); }

CsvWriter& CsvWriter::cell(long long v) { return cell(std::string_view(std::to_string(v))); }

void CsvWriter::end_row() {
    os_ << "\r\n";
    first_ = true;
}

void CsvWriter::row(std::initializer_list<std::string_view> fields) {
    for (auto f : fields) cell(f);
    end_row();
}

}  // namespace xbar
