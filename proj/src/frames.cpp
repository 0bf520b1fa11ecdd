#include "padeit/frames.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "padeit/csv.hpp"
#include "padeit/error.hpp"

namespace padeit {

void FrameSeries::validate() const {
    if (!(rate > 0.0)) throw DataError(fmt::format("sampling rate must be positive (got {})", rate));
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (frames[i].size() != frames.front().size()) {
            throw DataError(fmt::format("frame {} has {} channels, expected {}", i, frames[i].size(),
                                        frames.front().size()));
        }
        if (!frames[i].allFinite()) throw DataError(fmt::format("frame {} has non-finite values", i));
    }
}

void write_series_csv(std::ostream& out, const FrameSeries& series) {
    out << "timestamp";
    for (std::size_t c = 0; c < series.channel_count(); ++c) fmt::print(out, ",ch_{}", c);
    out << '\n';
    for (std::size_t i = 0; i < series.size(); ++i) {
        out << format_number(series.timestamp(i));
        for (double v : series.frames[i]) out << ',' << format_number(v);
        out << '\n';
    }
}

FrameSeries read_series_csv(std::istream& in, double fallback_rate) {
    const CsvTable table = read_csv(in);
    if (table.header.empty() || table.header.front() != "timestamp") {
        throw ParseError("frame CSV must start with a 'timestamp' column", 1);
    }
    FrameSeries series;
    std::vector<double> stamps;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const int line = static_cast<int>(r) + 2;
        stamps.push_back(parse_number(row[0], line));
        FrameVector frame(static_cast<Eigen::Index>(row.size() - 1));
        for (std::size_t c = 1; c < row.size(); ++c) frame[static_cast<Eigen::Index>(c - 1)] = parse_number(row[c], line);
        series.frames.push_back(std::move(frame));
    }
    series.rate = fallback_rate;
    if (stamps.size() >= 2) {
        const double dt = (stamps.back() - stamps.front()) / static_cast<double>(stamps.size() - 1);
        if (!(dt > 0.0)) throw DataError("frame timestamps must increase");
        series.rate = 1.0 / dt;
    }
    series.validate();
    return series;
}

} // namespace padeit
