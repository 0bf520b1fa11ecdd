#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include "padeit/geometry.hpp"

namespace padeit {

/// All stochastic operations take an explicitly seeded engine.
using Rng = std::mt19937_64;

/// Rectangular pad layout. Column index runs along `orientation` (projected
/// into the tangent plane at the pad origin), row index along normal × orientation.
/// On 2D meshes the electrodes form a single line in row-major order.
struct GridLayout {
    int rows = 3;
    int cols = 3;
    double spacing = 60.0;                ///< centre-to-centre distance (mm)
    Vec3 origin = Vec3::Zero();           ///< pad centre, on or near the surface
    Vec3 orientation = Vec3::UnitX();     ///< column direction

    int electrode_count() const noexcept { return rows * cols; }
    int index(int row, int col) const noexcept { return row * cols + col; }
    void validate() const;
};

struct ElectrodeSet {
    std::vector<Vec3> nominal_positions; ///< intended attachment sites (mm)
    std::vector<int> node_indices;       ///< boundary node currently in contact
    double contact_radius = 15.0;        ///< region treated as "near" an electrode (mm)

    std::size_t size() const noexcept { return node_indices.size(); }
    /// Throws ValidationError unless nodes are distinct boundary nodes of `mesh`.
    void validate(const Mesh& mesh) const;

    friend bool operator==(const ElectrodeSet&, const ElectrodeSet&) = default;
};

/// Snaps every grid point to a surface node by projecting along the pad normal
/// onto the boundary nodes facing the pad. contact_radius defaults to spacing/4.
ElectrodeSet place_grid(const Mesh& mesh, const GridLayout& layout);

struct RelocateOptions {
    double min_displacement = 5.0; ///< clamped to max_displacement
    int max_retries = 64;
};

/// Moves the selected electrodes by a uniform random distance in
/// [min_displacement, max_displacement] along a uniform random tangential
/// direction, then snaps to the nearest boundary node. Draws that collide with
/// another electrode are repeated up to `max_retries` times.
ElectrodeSet relocate(const ElectrodeSet& electrodes, const Mesh& mesh, std::span<const int> indices,
                      double max_displacement, Rng& rng, const RelocateOptions& options = {});

struct FactorRange {
    double low = 2.0;
    double high = 5.0;
};

/// Contact-impedance shift: for each selected electrode a factor f ~ U[low, high]
/// is drawn and every element with a node within contact_radius of the
/// electrode node has its conductivity divided by f (impedance × f).
Mesh contact_shift(const Mesh& mesh, const ElectrodeSet& electrodes, std::span<const int> indices,
                   FactorRange factor_range, Rng& rng);

/// Elements touched by contact_shift for one electrode.
std::vector<std::size_t> elements_near(const Mesh& mesh, const Vec3& point, double radius);

/// CSV: electrode,x,y,z,node
void write_electrodes_csv(std::ostream& out, const ElectrodeSet& electrodes);

/// Uniform draw in [low, high]; the one place where electrodes/perturbations
/// turn engine output into reals.
double uniform(Rng& rng, double low, double high);

} // namespace padeit
