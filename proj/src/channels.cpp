#include "padeit/channels.hpp"

#include <algorithm>
#include <ostream>
#include <set>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "padeit/error.hpp"

namespace padeit {

Channel Channel::make(int inject_a, int inject_b, int sense_a, int sense_b) {
    const int v[4] = {inject_a, inject_b, sense_a, sense_b};
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j)
            if (v[i] == v[j])
                throw InvalidArgument(fmt::format("channel ({},{};{},{}) reuses electrode {}", inject_a, inject_b,
                                                  sense_a, sense_b, v[i]));
    return {std::min(inject_a, inject_b), std::max(inject_a, inject_b), std::min(sense_a, sense_b),
            std::max(sense_a, sense_b)};
}

ChannelPlan::ChannelPlan(std::vector<Channel> channels, int electrode_count)
    : channels_(std::move(channels)), electrode_count_(electrode_count) {
    std::set<Channel> seen;
    for (const auto& c : channels_) {
        for (int idx : {c.inject_pos, c.inject_neg, c.sense_pos, c.sense_neg}) {
            if (idx < 0 || idx >= electrode_count_) {
                throw ValidationError(fmt::format("channel electrode {} out of range ({})", idx, electrode_count_));
            }
        }
        if (!(c.inject_pos < c.inject_neg && c.sense_pos < c.sense_neg)) {
            throw ValidationError("channel pairs must be in canonical ascending order");
        }
        if (c.inject_neg == c.sense_pos || c.inject_neg == c.sense_neg || c.inject_pos == c.sense_pos ||
            c.inject_pos == c.sense_neg) {
            throw ValidationError("channel electrodes must be pairwise distinct");
        }
        if (!seen.insert(c).second) throw ValidationError("duplicate channel in plan");
    }
}

ChannelPlan ChannelPlan::merged_with(const ChannelPlan& other) const {
    if (other.electrode_count_ != electrode_count_) throw DimensionError("plans cover different electrode counts");
    std::set<Channel> seen(channels_.begin(), channels_.end());
    auto merged = channels_;
    for (const auto& c : other.channels_) {
        if (seen.insert(c).second) merged.push_back(c);
    }
    return ChannelPlan(std::move(merged), electrode_count_);
}

ChannelPlan enumerate_all(int n) {
    if (n < 4) throw InvalidArgument(fmt::format("need at least 4 electrodes (got {})", n));
    std::vector<Channel> out;
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
            for (int c = b + 1; c < n; ++c)
                for (int d = c + 1; d < n; ++d) {
                    // the six ways to pick the injection pair
                    out.push_back(Channel::make(a, b, c, d));
                    out.push_back(Channel::make(a, c, b, d));
                    out.push_back(Channel::make(a, d, b, c));
                    out.push_back(Channel::make(b, c, a, d));
                    out.push_back(Channel::make(b, d, a, c));
                    out.push_back(Channel::make(c, d, a, b));
                }
    return ChannelPlan(std::move(out), n);
}

namespace {

void require_2d_grid(const GridLayout& layout) {
    if (layout.rows < 2 || layout.cols < 2) {
        throw InvalidArgument(fmt::format("layout {}x{} needs at least 2 rows and 2 columns", layout.rows,
                                          layout.cols));
    }
}

/// Quadrilateral with corners in cyclic order p0,p1,p2,p3: diagonals (p0,p2)
/// and (p1,p3), injected on each in turn.
void add_diagonal_pair(std::vector<Channel>& out, int p0, int p1, int p2, int p3) {
    out.push_back(Channel::make(p0, p2, p1, p3));
    out.push_back(Channel::make(p1, p3, p0, p2));
}

} // namespace

ChannelPlan rectangle_channels(const GridLayout& layout) {
    require_2d_grid(layout);
    std::vector<Channel> out;
    for (int r1 = 0; r1 < layout.rows; ++r1)
        for (int r2 = r1 + 1; r2 < layout.rows; ++r2)
            for (int c1 = 0; c1 < layout.cols; ++c1)
                for (int c2 = c1 + 1; c2 < layout.cols; ++c2) {
                    const int a = layout.index(r1, c1);
                    const int b = layout.index(r1, c2);
                    const int c = layout.index(r2, c1);
                    const int d = layout.index(r2, c2);
                    out.push_back(Channel::make(a, b, c, d)); // top edge -> bottom edge
                    out.push_back(Channel::make(c, d, a, b));
                    out.push_back(Channel::make(a, c, b, d)); // left edge -> right edge
                    out.push_back(Channel::make(b, d, a, c));
                }
    return ChannelPlan(std::move(out), layout.electrode_count());
}

std::vector<Channel> unit_squares_diagonal_strategy(int rows, int cols) {
    std::vector<Channel> out;
    auto id = [cols](int r, int c) { return r * cols + c; };
    for (int r = 0; r + 1 < rows; ++r)
        for (int c = 0; c + 1 < cols; ++c)
            add_diagonal_pair(out, id(r, c), id(r, c + 1), id(r + 1, c + 1), id(r + 1, c));
    return out;
}

std::vector<Channel> squares_diagonal_strategy(int rows, int cols) {
    auto out = unit_squares_diagonal_strategy(rows, cols);
    auto id = [cols](int r, int c) { return r * cols + c; };
    if (rows > 2 || cols > 2) {
        add_diagonal_pair(out, id(0, 0), id(0, cols - 1), id(rows - 1, cols - 1), id(rows - 1, 0));
    }
    if (rows % 2 == 1 && cols % 2 == 1 && rows >= 3 && cols >= 3) {
        const int mr = rows / 2;
        const int mc = cols / 2;
        add_diagonal_pair(out, id(0, mc), id(mr, cols - 1), id(rows - 1, mc), id(mr, 0));
    }
    return out;
}

DiagonalStrategy diagonal_strategy(std::string_view name) {
    if (name == "squares") return squares_diagonal_strategy;
    if (name == "unit-squares") return unit_squares_diagonal_strategy;
    throw InvalidArgument(fmt::format("unknown diagonal strategy '{}'", name));
}

ChannelPlan diagonal_channels(const GridLayout& layout, const DiagonalStrategy& strategy) {
    require_2d_grid(layout);
    auto channels = strategy(layout.rows, layout.cols);
    // strategies may emit the same channel twice (e.g. degenerate corner squares)
    std::set<Channel> seen;
    std::vector<Channel> unique;
    for (const auto& c : channels) {
        if (seen.insert(c).second) unique.push_back(c);
    }
    return ChannelPlan(std::move(unique), layout.electrode_count());
}

ChannelPlan default_plan(const GridLayout& layout, const DiagonalStrategy& strategy) {
    return rectangle_channels(layout).merged_with(diagonal_channels(layout, strategy));
}

ChannelPlan plan_by_name(std::string_view name, const GridLayout& layout, std::string_view diagonal) {
    if (name == "default") return default_plan(layout, diagonal_strategy(diagonal));
    if (name == "rectangle") return rectangle_channels(layout);
    if (name == "diagonal") return diagonal_channels(layout, diagonal_strategy(diagonal));
    if (name == "all") return enumerate_all(layout.electrode_count());
    throw InvalidArgument(fmt::format("unknown channel strategy '{}'", name));
}

void write_plan_csv(std::ostream& out, const ChannelPlan& plan) {
    out << "inject_pos,inject_neg,sense_pos,sense_neg\n";
    for (const auto& c : plan.channels()) {
        fmt::print(out, "{},{},{},{}\n", c.inject_pos, c.inject_neg, c.sense_pos, c.sense_neg);
    }
}

} // namespace padeit
