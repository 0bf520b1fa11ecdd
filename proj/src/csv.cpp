#include "padeit/csv.hpp"

#include <algorithm>
#include <istream>
#include <limits>

#include <fmt/format.h>

#include "padeit/error.hpp"

namespace padeit {

std::string format_number(double v) {
    if (v == 0.0) return "0"; // folds -0
    return fmt::format("{}", v);
}

std::size_t CsvTable::column(std::string_view name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError(fmt::format("CSV has no column '{}'", name));
    return static_cast<std::size_t>(it - header.begin());
}

namespace {

/// Splits one record; handles quoted fields spanning commas (not newlines).
std::vector<std::string> split_record(const std::string& line, int line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (quoted) throw ParseError("unterminated quoted field", line_no);
    fields.push_back(std::move(cur));
    return fields;
}

} // namespace

CsvTable read_csv(std::istream& in) {
    CsvTable table;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_record(line, line_no);
        if (table.header.empty()) {
            table.header = std::move(fields);
            continue;
        }
        if (fields.size() != table.header.size()) {
            throw ParseError(fmt::format("expected {} fields, found {}", table.header.size(), fields.size()), line_no);
        }
        table.rows.push_back(std::move(fields));
    }
    if (table.header.empty()) throw ParseError("empty CSV", line_no);
    return table;
}

double parse_number(const std::string& field, int line) {
    if (field == "inf") return std::numeric_limits<double>::infinity();
    if (field == "-inf") return -std::numeric_limits<double>::infinity();
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(field, &pos);
    } catch (const std::exception&) {
        throw ParseError(fmt::format("expected a number, got '{}'", field), line);
    }
    if (pos != field.size()) throw ParseError(fmt::format("expected a number, got '{}'", field), line);
    return v;
}

std::string csv_field(std::string_view text) {
    if (text.find_first_of(",\"\n") == std::string_view::npos) return std::string(text);
    std::string out = "\"";
    for (char ch : text) {
        if (ch == '"') out += '"';
        out += ch;
    }
    out += '"';
    return out;
}

} // namespace padeit
