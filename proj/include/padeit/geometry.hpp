#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace padeit {

/// Coordinates are millimetres. 2D meshes keep z = 0.
using Vec3 = Eigen::Vector3d;

/// Node indices of a simplex. Triangles leave the last slot at -1.
using Element = std::array<int, 4>;

struct BoundingBox {
    Vec3 lo;
    Vec3 hi;

    bool contains(const Vec3& p, double tol = 0.0) const {
        return (p.array() >= lo.array() - tol).all() && (p.array() <= hi.array() + tol).all();
    }
};

/// Simplicial mesh with a piecewise-constant conductivity field (S/m).
///
/// Topology (nodes, elements, boundary, per-element measure) is shared between
/// copies; only the conductivity vector is owned per value. Constructing a mesh
/// checks every invariant and throws ValidationError naming the first violation:
///   - each element has strictly positive signed area/volume,
///   - each conductivity is finite and > 0,
///   - every referenced node exists,
///   - the face-adjacency graph of the elements is connected.
class Mesh {
public:
    Mesh(int dim, std::vector<Vec3> nodes, std::vector<Element> elements,
         std::vector<double> conductivity);

    int dim() const noexcept { return topo_->dim; }
    int nodes_per_element() const noexcept { return topo_->dim + 1; }
    std::size_t node_count() const noexcept { return topo_->nodes.size(); }
    std::size_t element_count() const noexcept { return topo_->elements.size(); }

    std::span<const Vec3> nodes() const noexcept { return topo_->nodes; }
    std::span<const Element> elements() const noexcept { return topo_->elements; }
    std::span<const double> conductivity() const noexcept { return conductivity_; }

    /// Sorted indices of nodes on the outer surface.
    std::span<const int> boundary_nodes() const noexcept { return topo_->boundary; }
    bool is_boundary(int node) const;

    /// Outward unit normal at a boundary node (area-weighted average of the
    /// incident boundary facets). Zero vector for interior nodes.
    const Vec3& boundary_normal(int node) const { return topo_->normals.at(node); }

    const Vec3& node(int i) const { return topo_->nodes[static_cast<std::size_t>(i)]; }
    const Element& element(std::size_t e) const { return topo_->elements[e]; }
    Vec3 centroid(std::size_t e) const { return topo_->centroids[e]; }
    /// Area (mm^2) or volume (mm^3).
    double measure(std::size_t e) const { return topo_->measures[e]; }
    double total_measure() const noexcept { return topo_->total_measure; }
    const BoundingBox& bounds() const noexcept { return topo_->bounds; }

    /// Same topology, new conductivity vector (validated).
    Mesh with_conductivity(std::vector<double> conductivity) const;

    /// True when both meshes share the same topology object.
    bool same_topology(const Mesh& other) const noexcept { return topo_ == other.topo_; }

private:
    struct Topology {
        int dim = 0;
        std::vector<Vec3> nodes;
        std::vector<Element> elements;
        std::vector<int> boundary;
        std::vector<char> boundary_flag;
        std::vector<Vec3> normals;
        std::vector<Vec3> centroids;
        std::vector<double> measures;
        double total_measure = 0.0;
        BoundingBox bounds;
    };

    Mesh(std::shared_ptr<const Topology> topo, std::vector<double> conductivity);
    static void check_conductivity(std::span<const double> sigma, std::size_t expected);

    std::shared_ptr<const Topology> topo_;
    std::vector<double> conductivity_;
};

/// Signed area (triangle) or volume (tetrahedron) of an element under the given
/// coordinates. Positive means counter-clockwise / right-handed ordering.
double signed_measure(int dim, std::span<const Vec3> nodes, const Element& element);

/// Axis-aligned ellipsoid: semi-axis a along x, b along y, c along z.
/// A zero-radius ellipsoid is the "no inclusion" sentinel.
struct EllipsoidInclusion {
    Vec3 center = Vec3::Zero();
    Vec3 radii = Vec3::Zero();
    double conductivity = 1.75;

    bool empty() const noexcept { return (radii.array() <= 0.0).any(); }
    bool contains(const Vec3& p) const;
    /// Analytic volume in mL (1 mL = 1000 mm^3).
    double volume_ml() const;
};

Mesh generate_disc_mesh(double radius, int target_element_count);
Mesh generate_cylinder_mesh(double radius, double height, int target_element_count);

/// Cylinder (axis along z, base at z = 0) whose element size grows with depth
/// below the lateral surface and with distance from a focus height. Used for
/// torso-scale domains where only the region under the pad needs fine nodes.
struct GradedCylinderSpec {
    double radius = 150.0;
    double height = 240.0;
    double surface_spacing = 8.0;  ///< element size at the lateral surface (mm)
    double core_spacing = 30.0;    ///< upper bound on element size (mm)
    double growth = 0.35;          ///< size increase per mm of depth / distance
    double focus_z = 120.0;        ///< height of the finest layers (mm)
    double focus_halfwidth = 90.0; ///< layers within this distance stay fine
};

Mesh generate_graded_cylinder_mesh(const GradedCylinderSpec& spec);

/// Reads the line-oriented mesh format:
///
///     dim <2|3>
///     nodes <N>
///     x y [z]          (N lines)
///     elements <M>
///     i j k [l]        (M lines, 0-based)
///     sigma <M>        (optional block, one value per line)
///
/// `#` starts a comment. Throws ParseError (with line number) or ValidationError.
Mesh load_mesh(const std::filesystem::path& path);
void save_mesh(const Mesh& mesh, const std::filesystem::path& path);

/// Radii proportional to `aspect` such that (4/3)·π·a·b·c equals `volume_ml`
/// (converted to mm^3). volume 0 yields the empty sentinel.
EllipsoidInclusion volume_to_ellipsoid(double volume_ml, const Vec3& aspect, const Vec3& center,
                                       double conductivity = 1.75);

/// Elements whose centroid lies inside the ellipsoid take its conductivity.
Mesh apply_inclusion(const Mesh& mesh, const EllipsoidInclusion& inclusion);

/// Uniform conductivity field of the given value.
Mesh with_uniform_conductivity(const Mesh& mesh, double sigma);

} // namespace padeit
