#pragma once

#include <filesystem>
#include <random>
#include <vector>

#include "padeit/channels.hpp"
#include "padeit/electrodes.hpp"
#include "padeit/geometry.hpp"

namespace padeit::test {

inline std::filesystem::path data_dir() { return PADEIT_TEST_DATA; }

/// Small 3D body with a 3x3 pad on its front (y = -r) face.
struct SmallBody {
    Mesh mesh;
    GridLayout layout;
    ElectrodeSet electrodes;
    ChannelPlan plan;
};

inline SmallBody small_body(int target_elements = 1500, double radius = 60.0, double height = 80.0,
                            double spacing = 25.0) {
    Mesh mesh = generate_cylinder_mesh(radius, height, target_elements);
    GridLayout layout{3, 3, spacing, Vec3(0.0, -radius, height / 2.0), Vec3::UnitX()};
    auto electrodes = place_grid(mesh, layout);
    auto plan = default_plan(layout);
    return {std::move(mesh), layout, std::move(electrodes), std::move(plan)};
}

/// 2D disc with electrodes spread around the whole rim.
inline ElectrodeSet rim_electrodes(const Mesh& disc, int count) {
    std::vector<int> boundary(disc.boundary_nodes().begin(), disc.boundary_nodes().end());
    ElectrodeSet out;
    const std::size_t step = boundary.size() / static_cast<std::size_t>(count);
    for (int i = 0; i < count; ++i) {
        const int node = boundary[static_cast<std::size_t>(i) * step];
        out.node_indices.push_back(node);
        out.nominal_positions.push_back(disc.node(node));
    }
    return out;
}

/// Independent orientation oracle: determinant of the edge vectors.
inline double oriented_measure(const Mesh& mesh, std::size_t e) {
    const auto& el = mesh.element(e);
    const Vec3& a = mesh.node(el[0]);
    if (mesh.dim() == 2) {
        const Vec3 u = mesh.node(el[1]) - a;
        const Vec3 v = mesh.node(el[2]) - a;
        return 0.5 * (u.x() * v.y() - u.y() * v.x());
    }
    Eigen::Matrix3d m;
    for (int k = 0; k < 3; ++k) m.col(k) = mesh.node(el[static_cast<std::size_t>(k + 1)]) - a;
    return m.determinant() / 6.0;
}

} // namespace padeit::test
