#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace padeit {

/// One voltage (V) per channel, in channel-plan order.
using FrameVector = Eigen::VectorXd;

/// Time-ordered frames sampled at a fixed rate.
struct FrameSeries {
    std::vector<FrameVector> frames;
    double rate = 3.0; ///< Hz
    std::string session;

    std::size_t size() const noexcept { return frames.size(); }
    bool empty() const noexcept { return frames.empty(); }
    std::size_t channel_count() const noexcept { return frames.empty() ? 0 : static_cast<std::size_t>(frames.front().size()); }
    double timestamp(std::size_t i) const { return static_cast<double>(i) / rate; }

    /// Throws DataError unless rate > 0, frames share a length and are finite.
    void validate() const;
};

/// CSV with header `timestamp,ch_0,...,ch_{n-1}` and one row per frame.
void write_series_csv(std::ostream& out, const FrameSeries& series);
/// Inverse of write_series_csv. The rate is recovered from the timestamp
/// spacing (or `fallback_rate` for single-frame files).
FrameSeries read_series_csv(std::istream& in, double fallback_rate = 3.0);

} // namespace padeit
