#include "sprtl/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include "sprtl/errors.hpp"

namespace sprtl::csv {

std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view field, const std::string& context) {
    double value = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc() || res.ptr != last || field.empty()) {
        throw DataFormatError(context + ": cannot parse '" + std::string(field) +
                              "' as a number");
    }
    return value;
}

long parse_long(std::string_view field, const std::string& context) {
    long value = 0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc() || res.ptr != last || field.empty()) {
        throw DataFormatError(context + ": cannot parse '" + std::string(field) +
                              "' as an integer");
    }
    return value;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

Table read_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataFormatError(path + ": cannot open file");

    Table table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split(line);
        if (line_no == 1) {
            for (auto f : fields) table.header.emplace_back(f);
            continue;
        }
        if (fields.size() != table.header.size()) {
            std::ostringstream msg;
            msg << path << ":" << line_no << ": expected " << table.header.size()
                << " fields, got " << fields.size();
            throw DataFormatError(msg.str());
        }
        std::vector<std::string> row;
        row.reserve(fields.size());
        for (auto f : fields) row.emplace_back(f);
        table.rows.push_back(std::move(row));
    }
    if (table.header.empty()) throw DataFormatError(path + ": empty file");
    return table;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataFormatError(path + ": cannot open file for writing");
    for (const auto& l : lines) {
        out << l << '\n';
    }
    if (!out) throw DataFormatError(path + ": write failed");
}

std::string join(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.push_back(',');
        out += fields[i];
    }
    return out;
}

}  // namespace sprtl::csv
