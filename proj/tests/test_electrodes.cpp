#include <algorithm>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "padeit/electrodes.hpp"
#include "padeit/error.hpp"
#include "support.hpp"

using namespace padeit;

namespace {

const Mesh& body() {
    static const Mesh mesh = generate_cylinder_mesh(60.0, 80.0, 1500);
    return mesh;
}

GridLayout front_pad(int rows = 3, int cols = 3, double spacing = 25.0) {
    return {rows, cols, spacing, Vec3(0.0, -60.0, 40.0), Vec3::UnitX()};
}

} // namespace

TEST(Electrodes, GridSnapsToDistinctSurfaceNodes) {
    const auto el = place_grid(body(), front_pad());
    ASSERT_EQ(el.size(), 9u);
    EXPECT_NO_THROW(el.validate(body()));
    EXPECT_DOUBLE_EQ(el.contact_radius, 25.0 / 4.0);
    for (std::size_t i = 0; i < el.size(); ++i) {
        EXPECT_TRUE(body().is_boundary(el.node_indices[i]));
        EXPECT_EQ(el.nominal_positions[i], body().node(el.node_indices[i]));
        // pad faces -y
        EXPECT_LT(body().boundary_normal(el.node_indices[i]).y(), 0.0);
    }
    // columns run along x, rows along z
    const auto& p = el.nominal_positions;
    EXPECT_LT(p[0].x(), p[1].x());
    EXPECT_LT(p[1].x(), p[2].x());
    EXPECT_NE(p[0].z(), p[3].z());
    EXPECT_NEAR(std::abs(p[0].z() - p[6].z()), 50.0, 20.0);
}

TEST(Electrodes, PlacementIsDeterministic) {
    EXPECT_EQ(place_grid(body(), front_pad()), place_grid(body(), front_pad()));
}

TEST(Electrodes, PlacementErrors) {
    // spacing too fine for the surface nodes: two grid points share a node
    try {
        place_grid(body(), front_pad(3, 3, 0.5));
        FAIL() << "expected collision";
    } catch (const PlacementError& e) {
        EXPECT_EQ(e.reason(), PlacementError::Reason::collision);
        EXPECT_EQ(e.kind(), "placement_collision");
    }
    // top row hangs 30 mm above the cylinder
    try {
        place_grid(body(), GridLayout{3, 3, 40.0, Vec3(0.0, -60.0, 70.0), Vec3::UnitX()});
        FAIL() << "expected out_of_surface";
    } catch (const PlacementError& e) {
        EXPECT_EQ(e.reason(), PlacementError::Reason::out_of_surface);
    }
    EXPECT_THROW(place_grid(body(), front_pad(1, 3)), InvalidArgument);
    EXPECT_THROW(place_grid(body(), front_pad(3, 3, -1.0)), InvalidArgument);
    EXPECT_THROW(place_grid(body(), GridLayout{3, 3, 25.0, Vec3(0, -60, 40), Vec3::UnitY()}), InvalidArgument);
}

TEST(Electrodes, ValidateRejectsBadSets) {
    auto el = place_grid(body(), front_pad());
    auto dup = el;
    dup.node_indices[1] = dup.node_indices[0];
    EXPECT_THROW(dup.validate(body()), ValidationError);

    int interior = -1;
    for (std::size_t n = 0; n < body().node_count(); ++n) {
        if (!body().is_boundary(static_cast<int>(n))) {
            interior = static_cast<int>(n);
            break;
        }
    }
    ASSERT_GE(interior, 0);
    auto inner = el;
    inner.node_indices[0] = interior;
    EXPECT_THROW(inner.validate(body()), ValidationError);
}

TEST(Electrodes, RelocateMovesOnlySelected) {
    const auto el = place_grid(body(), front_pad());
    Rng rng(11);
    const std::vector<int> sel{1, 4, 7};
    const auto moved = relocate(el, body(), sel, 20.0, rng);
    EXPECT_NO_THROW(moved.validate(body()));
    EXPECT_EQ(moved.nominal_positions, el.nominal_positions);
    for (int i = 0; i < 9; ++i) {
        const auto u = static_cast<std::size_t>(i);
        if (std::find(sel.begin(), sel.end(), i) == sel.end()) {
            EXPECT_EQ(moved.node_indices[u], el.node_indices[u]);
        } else {
            // snapped distance stays near the drawn [5, 20] mm band
            const double d = (body().node(moved.node_indices[u]) - el.nominal_positions[u]).norm();
            EXPECT_LE(d, 20.0 + 15.0);
        }
    }
}

TEST(Electrodes, RelocateDeterministicAndSeedSensitive) {
    const auto el = place_grid(body(), front_pad());
    const std::vector<int> all{0, 1, 2, 3, 4, 5, 6, 7, 8};
    Rng a(5), b(5), c(6);
    const auto ma = relocate(el, body(), all, 20.0, a);
    EXPECT_EQ(ma, relocate(el, body(), all, 20.0, b));
    EXPECT_NE(ma, relocate(el, body(), all, 20.0, c));
}

TEST(Electrodes, RelocateZeroDisplacementIsIdentity) {
    const auto el = place_grid(body(), front_pad());
    Rng rng(3);
    const std::vector<int> sel{0, 8};
    EXPECT_EQ(relocate(el, body(), sel, 0.0, rng), el);
    EXPECT_THROW(relocate(el, body(), sel, -1.0, rng), InvalidArgument);
    const std::vector<int> bad{9};
    EXPECT_THROW(relocate(el, body(), bad, 10.0, rng), InvalidArgument);
}

TEST(Electrodes, RelocateRetriesExhausted) {
    // every rim node of a coarse disc is an electrode: any move collides
    const Mesh disc = generate_disc_mesh(10.0, 20);
    const auto n = static_cast<int>(disc.boundary_nodes().size());
    ElectrodeSet el;
    for (int node : disc.boundary_nodes()) {
        el.node_indices.push_back(node);
        el.nominal_positions.push_back(disc.node(node));
    }
    Rng rng(1);
    const std::vector<int> sel{0};
    try {
        relocate(el, disc, sel, 8.0, rng, RelocateOptions{6.0, 4});
        FAIL() << "expected retries_exhausted with " << n << " rim electrodes";
    } catch (const PlacementError& e) {
        EXPECT_EQ(e.reason(), PlacementError::Reason::retries_exhausted);
    }
}

TEST(Electrodes, ContactShiftDividesNearbyConductivity) {
    const Mesh mesh = with_uniform_conductivity(body(), 0.2);
    const auto el = place_grid(mesh, front_pad());
    Rng rng(9);
    const std::vector<int> sel{4};
    const Mesh shifted = contact_shift(mesh, el, sel, {2.0, 5.0}, rng);
    EXPECT_TRUE(shifted.same_topology(mesh));

    const auto near = elements_near(mesh, mesh.node(el.node_indices[4]), el.contact_radius);
    ASSERT_FALSE(near.empty());
    const std::set<std::size_t> near_set(near.begin(), near.end());
    const double factor = 0.2 / shifted.conductivity()[near.front()];
    EXPECT_GE(factor, 2.0);
    EXPECT_LE(factor, 5.0);
    for (std::size_t e = 0; e < mesh.element_count(); ++e) {
        if (near_set.count(e)) EXPECT_DOUBLE_EQ(shifted.conductivity()[e], 0.2 / factor);
        else EXPECT_EQ(shifted.conductivity()[e], 0.2);
    }
}

TEST(Electrodes, ContactShiftValidation) {
    const auto el = place_grid(body(), front_pad());
    Rng rng(1);
    const std::vector<int> sel{0};
    EXPECT_THROW(contact_shift(body(), el, sel, {0.5, 2.0}, rng), InvalidArgument);
    EXPECT_THROW(contact_shift(body(), el, sel, {3.0, 2.0}, rng), InvalidArgument);
    const std::vector<int> none;
    EXPECT_EQ(contact_shift(body(), el, none, {2.0, 5.0}, rng).conductivity().size(), body().element_count());
}

TEST(Electrodes, TwoDimensionalLine) {
    const Mesh disc = generate_disc_mesh(100.0, 800);
    const auto el = place_grid(disc, GridLayout{2, 3, 20.0, Vec3(0.0, -100.0, 0.0), Vec3::UnitX()});
    EXPECT_EQ(el.size(), 6u);
    EXPECT_NO_THROW(el.validate(disc));
    for (std::size_t i = 1; i < el.size(); ++i) EXPECT_LT(el.nominal_positions[i - 1].x(), el.nominal_positions[i].x());
}

TEST(Electrodes, CsvOutput) {
    ElectrodeSet el;
    el.nominal_positions = {Vec3(1.0, 2.5, 0.0)};
    el.node_indices = {7};
    std::ostringstream os;
    write_electrodes_csv(os, el);
    EXPECT_EQ(os.str(), "electrode,x,y,z,node\n0,1,2.5,0,7\n");
}
