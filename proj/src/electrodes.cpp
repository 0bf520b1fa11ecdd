#include "padeit/electrodes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "padeit/error.hpp"

namespace padeit {

namespace {

std::vector<int> sorted_selection(std::span<const int> indices, std::size_t count) {
    std::vector<int> sel(indices.begin(), indices.end());
    std::sort(sel.begin(), sel.end());
    sel.erase(std::unique(sel.begin(), sel.end()), sel.end());
    for (int i : sel) {
        if (i < 0 || static_cast<std::size_t>(i) >= count) {
            throw InvalidArgument(fmt::format("electrode index {} out of range (count {})", i, count));
        }
    }
    return sel;
}

/// Any unit vector orthogonal to n, chosen deterministically.
Vec3 perpendicular(const Vec3& n) {
    const Vec3 a = n.cwiseAbs();
    Vec3 axis = Vec3::UnitX();
    if (a.y() <= a.x() && a.y() <= a.z()) axis = Vec3::UnitY();
    else if (a.z() <= a.x() && a.z() <= a.y()) axis = Vec3::UnitZ();
    return (axis - axis.dot(n) * n).normalized();
}

int nearest_boundary_node(const Mesh& mesh, const Vec3& p) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int n : mesh.boundary_nodes()) {
        const double d = (mesh.node(n) - p).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = n;
        }
    }
    return best;
}

} // namespace

double uniform(Rng& rng, double low, double high) {
    if (low == high) return low;
    return std::uniform_real_distribution<double>(low, high)(rng);
}

void GridLayout::validate() const {
    if (rows < 1 || cols < 1 || (rows < 2 && cols < 2) || rows * cols < 4) {
        throw InvalidArgument(fmt::format("grid {}x{} needs at least 4 electrodes", rows, cols));
    }
    if (!(spacing > 0.0) || !std::isfinite(spacing)) {
        throw InvalidArgument(fmt::format("grid spacing must be positive (got {})", spacing));
    }
    if (!origin.allFinite() || !orientation.allFinite() || orientation.norm() == 0.0) {
        throw InvalidArgument("grid origin/orientation must be finite with non-zero orientation");
    }
}

void ElectrodeSet::validate(const Mesh& mesh) const {
    if (nominal_positions.size() != node_indices.size()) {
        throw ValidationError("electrode position and node counts differ");
    }
    std::vector<int> sorted = node_indices;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw ValidationError("electrode nodes are not pairwise distinct");
    }
    for (int n : node_indices) {
        if (!mesh.is_boundary(n)) throw ValidationError(fmt::format("electrode node {} is not a boundary node", n));
    }
    for (const auto& p : nominal_positions) {
        if (!mesh.bounds().contains(p, 1e-6)) throw ValidationError("electrode position outside mesh bounds");
    }
}

ElectrodeSet place_grid(const Mesh& mesh, const GridLayout& layout) {
    layout.validate();
    const int anchor = nearest_boundary_node(mesh, layout.origin);
    const Vec3 normal = mesh.boundary_normal(anchor);
    Vec3 t1 = layout.orientation - layout.orientation.dot(normal) * normal;
    if (mesh.dim() == 2) t1.z() = 0.0;
    if (t1.norm() < 1e-9) throw InvalidArgument("grid orientation is parallel to the surface normal");
    t1.normalize();
    const Vec3 t2 = normal.cross(t1);

    std::vector<int> candidates;
    for (int n : mesh.boundary_nodes()) {
        if (mesh.boundary_normal(n).dot(normal) > 1e-6) candidates.push_back(n);
    }
    const int count = layout.electrode_count();
    if (static_cast<std::size_t>(count) > candidates.size()) {
        throw PlacementError(PlacementError::Reason::collision,
                             fmt::format("{} electrodes but only {} surface nodes face the pad", count,
                                         candidates.size()));
    }

    ElectrodeSet out;
    out.contact_radius = layout.spacing / 4.0;
    std::vector<double> distance;
    for (int r = 0; r < layout.rows; ++r) {
        for (int c = 0; c < layout.cols; ++c) {
            Vec3 p;
            if (mesh.dim() == 2) {
                const double k = layout.index(r, c) - (count - 1) / 2.0;
                p = layout.origin + k * layout.spacing * t1;
            } else {
                p = layout.origin + (c - (layout.cols - 1) / 2.0) * layout.spacing * t1 +
                    (r - (layout.rows - 1) / 2.0) * layout.spacing * t2;
            }
            int best = -1;
            double best_tan = std::numeric_limits<double>::infinity();
            double best_depth = std::numeric_limits<double>::infinity();
            for (int n : candidates) {
                const Vec3 d = mesh.node(n) - p;
                const double depth = std::abs(d.dot(normal));
                const double tan = (d - d.dot(normal) * normal).norm();
                if (tan < best_tan - 1e-12 || (std::abs(tan - best_tan) <= 1e-12 && depth < best_depth)) {
                    best = n;
                    best_tan = tan;
                    best_depth = depth;
                }
            }
            out.node_indices.push_back(best);
            distance.push_back(best_tan);
        }
    }
    for (std::size_t i = 0; i < out.node_indices.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (out.node_indices[i] == out.node_indices[j]) {
                throw PlacementError(PlacementError::Reason::collision,
                                     fmt::format("electrodes {} and {} snap to the same node {}", j, i,
                                                 out.node_indices[i]));
            }
        }
    }
    for (std::size_t i = 0; i < distance.size(); ++i) {
        if (distance[i] > layout.spacing / 2.0) {
            throw PlacementError(PlacementError::Reason::out_of_surface,
                                 fmt::format("electrode {} has no surface node within {} mm", i,
                                             layout.spacing / 2.0));
        }
    }
    for (int n : out.node_indices) out.nominal_positions.push_back(mesh.node(n));
    return out;
}

ElectrodeSet relocate(const ElectrodeSet& electrodes, const Mesh& mesh, std::span<const int> indices,
                      double max_displacement, Rng& rng, const RelocateOptions& options) {
    if (!(max_displacement >= 0.0) || !std::isfinite(max_displacement)) {
        throw InvalidArgument(fmt::format("max displacement must be >= 0 (got {})", max_displacement));
    }
    const auto selection = sorted_selection(indices, electrodes.size());
    const double lo = std::clamp(options.min_displacement, 0.0, max_displacement);

    ElectrodeSet out = electrodes;
    for (int idx : selection) {
        const auto i = static_cast<std::size_t>(idx);
        const Vec3 base = electrodes.nominal_positions[i];
        const Vec3 n = mesh.boundary_normal(electrodes.node_indices[i]);
        Vec3 t1;
        Vec3 t2 = Vec3::Zero();
        if (mesh.dim() == 2) {
            t1 = Vec3(-n.y(), n.x(), 0.0);
        } else {
            t1 = perpendicular(n);
            t2 = n.cross(t1);
        }
        bool placed = false;
        for (int attempt = 0; attempt <= options.max_retries && !placed; ++attempt) {
            const double d = uniform(rng, lo, max_displacement);
            const double theta = uniform(rng, 0.0, 2.0 * std::numbers::pi);
            Vec3 q;
            if (mesh.dim() == 2) q = base + d * (std::cos(theta) < 0.0 ? -1.0 : 1.0) * t1;
            else q = base + d * (std::cos(theta) * t1 + std::sin(theta) * t2);
            const int node = nearest_boundary_node(mesh, q);
            bool collides = false;
            for (std::size_t j = 0; j < out.size(); ++j) {
                if (j != i && out.node_indices[j] == node) collides = true;
            }
            if (!collides) {
                out.node_indices[i] = node;
                placed = true;
            }
        }
        if (!placed) {
            throw PlacementError(PlacementError::Reason::retries_exhausted,
                                 fmt::format("no collision-free relocation for electrode {} after {} retries",
                                             idx, options.max_retries));
        }
    }
    return out;
}

std::vector<std::size_t> elements_near(const Mesh& mesh, const Vec3& point, double radius) {
    std::vector<char> near(mesh.node_count(), 0);
    const double r2 = radius * radius;
    for (std::size_t n = 0; n < mesh.node_count(); ++n) {
        if ((mesh.nodes()[n] - point).squaredNorm() <= r2) near[n] = 1;
    }
    std::vector<std::size_t> out;
    const int nv = mesh.nodes_per_element();
    for (std::size_t e = 0; e < mesh.element_count(); ++e) {
        const auto& el = mesh.element(e);
        for (int v = 0; v < nv; ++v) {
            if (near[static_cast<std::size_t>(el[static_cast<std::size_t>(v)])]) {
                out.push_back(e);
                break;
            }
        }
    }
    return out;
}

Mesh contact_shift(const Mesh& mesh, const ElectrodeSet& electrodes, std::span<const int> indices,
                   FactorRange range, Rng& rng) {
    if (!(range.low >= 1.0) || !(range.high >= range.low) || !std::isfinite(range.high)) {
        throw InvalidArgument(fmt::format("factor range must satisfy 1 <= low <= high (got [{}, {}])",
                                          range.low, range.high));
    }
    const auto selection = sorted_selection(indices, electrodes.size());
    std::vector<double> sigma(mesh.conductivity().begin(), mesh.conductivity().end());
    for (int idx : selection) {
        const double factor = uniform(rng, range.low, range.high);
        const Vec3& at = mesh.node(electrodes.node_indices[static_cast<std::size_t>(idx)]);
        for (std::size_t e : elements_near(mesh, at, electrodes.contact_radius)) sigma[e] /= factor;
    }
    return mesh.with_conductivity(std::move(sigma));
}

void write_electrodes_csv(std::ostream& out, const ElectrodeSet& electrodes) {
    out << "electrode,x,y,z,node\n";
    for (std::size_t i = 0; i < electrodes.size(); ++i) {
        const Vec3& p = electrodes.nominal_positions[i];
        fmt::print(out, "{},{:.17g},{:.17g},{:.17g},{}\n", i, p.x(), p.y(), p.z(), electrodes.node_indices[i]);
    }
}

} // namespace padeit
