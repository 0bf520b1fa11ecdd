#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "padeit/electrodes.hpp"

namespace padeit {

/// Tetrapolar channel: current from inject_pos to inject_neg, voltage
/// u(sense_pos) - u(sense_neg). Pairs are stored in ascending index order.
struct Channel {
    int inject_pos = 0;
    int inject_neg = 0;
    int sense_pos = 0;
    int sense_neg = 0;

    /// Canonical form: both pairs ascending. Throws unless all four differ.
    static Channel make(int inject_a, int inject_b, int sense_a, int sense_b);
    Channel swapped_roles() const { return {sense_pos, sense_neg, inject_pos, inject_neg}; }

    friend auto operator<=>(const Channel&, const Channel&) = default;
};

class ChannelPlan {
public:
    ChannelPlan(std::vector<Channel> channels, int electrode_count);

    const std::vector<Channel>& channels() const noexcept { return channels_; }
    std::size_t size() const noexcept { return channels_.size(); }
    int electrode_count() const noexcept { return electrode_count_; }
    const Channel& operator[](std::size_t i) const { return channels_[i]; }

    /// Concatenation with duplicates of earlier channels dropped.
    ChannelPlan merged_with(const ChannelPlan& other) const;

private:
    std::vector<Channel> channels_;
    int electrode_count_;
};

/// Every 4-subset of n electrodes split into injection and sensing pairs:
/// C(n,4)·C(4,2) channels.
ChannelPlan enumerate_all(int electrode_count);

/// For each axis-aligned rectangle (pair of rows × pair of columns): inject on
/// one edge, sense on the opposite one, for both edge pairs and both role
/// assignments. Rectangles are visited row-major.
ChannelPlan rectangle_channels(const GridLayout& layout);

/// Builds diagonal channels for a rows × cols grid.
using DiagonalStrategy = std::function<std::vector<Channel>(int rows, int cols)>;

/// Unit 2×2 sub-squares, the full-span corner rectangle and, when rows and
/// cols are both odd, the diamond through the four edge midpoints. Each
/// quadrilateral contributes "inject on one diagonal, sense on the other" in
/// both role assignments (12 channels on a 3×3 grid).
std::vector<Channel> squares_diagonal_strategy(int rows, int cols);

/// Only the unit 2×2 sub-squares.
std::vector<Channel> unit_squares_diagonal_strategy(int rows, int cols);

/// Looks up a diagonal strategy by name ("squares", "unit-squares").
DiagonalStrategy diagonal_strategy(std::string_view name);

ChannelPlan diagonal_channels(const GridLayout& layout,
                              const DiagonalStrategy& strategy = squares_diagonal_strategy);

/// rectangle_channels ++ diagonal_channels with duplicates removed.
ChannelPlan default_plan(const GridLayout& layout,
                         const DiagonalStrategy& strategy = squares_diagonal_strategy);

/// "default", "rectangle", "diagonal" or "all"; `diagonal` picks the strategy.
ChannelPlan plan_by_name(std::string_view name, const GridLayout& layout,
                         std::string_view diagonal = "squares");

/// CSV: inject_pos,inject_neg,sense_pos,sense_neg
void write_plan_csv(std::ostream& out, const ChannelPlan& plan);

} // namespace padeit
