#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace sprtl::csv {

// Shortest decimal string that round-trips to the same double. Using this
// everywhere keeps output files byte-stable across runs and platforms.
std::string format_double(double x);

// Strict double parser; `context` (typically "file:line") is included in the
// DataFormatError message on failure. Leading/trailing spaces are rejected.
double parse_double(std::string_view field, const std::string& context);

long parse_long(std::string_view field, const std::string& context);

// Plain comma split. Fields are taken verbatim; there is no quoting in any
// of the formats this project reads or writes.
std::vector<std::string_view> split(std::string_view line);

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

// Reads a whole CSV file (header + data rows, LF or CRLF). Blank trailing
// lines are ignored; a ragged row throws DataFormatError.
Table read_table(const std::string& path);

void write_lines(const std::string& path, const std::vector<std::string>& lines);

std::string join(const std::vector<std::string>& fields);

}  // namespace sprtl::csv
