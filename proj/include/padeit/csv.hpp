#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace padeit {

/// Shortest round-trip decimal representation; identical bits give identical text.
std::string format_number(double v);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index by name; throws DataError when missing.
    std::size_t column(std::string_view name) const;
};

/// RFC-4180 style reader: comma separated, optional double-quoted fields,
/// every row must match the header width.
CsvTable read_csv(std::istream& in);

/// Parses a finite-or-infinite decimal; ParseError mentions `line`.
double parse_number(const std::string& field, int line);

/// Quotes a field if it contains a comma, quote or newline.
std::string csv_field(std::string_view text);

} // namespace padeit
