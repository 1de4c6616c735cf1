#pragma once

#include <ostream>
#include <span>
#include <string>
#include <string_view>

namespace xbar {

std::string_view tool_version();

// Shortest round-trip decimal text for a double (locale independent).
std::string format_number(double v);

// RFC 4180 field quoting.
std::string csv_field(std::string_view s);

class CsvWriter {
public:
    explicit CsvWriter(std::ostream& os) : os_(os) {}
    CsvWriter& cell(std::string_view s);
    CsvWriter& cell(double v);
    CsvWriter& cell(long long v);
    CsvWriter& cell(int v) { return cell(static_cast<long long>(v)); }
    CsvWriter& cell(std::size_t v) { return cell(static_cast<long long>(v)); }
    void end_row();
    void row(std::initializer_list<std::string_view> fields);

private:
    std::ostream& os_;
    bool first_ = true;
};

}  // namespace xbar
