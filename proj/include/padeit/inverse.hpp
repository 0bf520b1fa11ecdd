#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "padeit/forward.hpp"
#include "padeit/geometry.hpp"

namespace padeit {

/// Per-element conductivity change from a one-step linearised solve.
struct ReconstructionField {
    Eigen::VectorXd values;
    double lambda = 0.0;
    double p = 0.5;
    /// Elements whose JᵀJ diagonal was exactly zero and got a floored prior.
    std::size_t floored_elements = 0;
    /// Set when the input difference vector was identically zero.
    bool degenerate = false;
};

struct ReconstructionOptions {
    std::optional<double> lambda; ///< default: 0.01·trace(JᵀJ)/channels
    double p = 0.5;
};

double default_lambda(const SensitivityMatrix& j);

/// Precomputes the regularised inverse for a fixed sensitivity matrix:
///
///     dsigma = (JᵀJ + λR)⁻¹ Jᵀ dv,   R = diag(JᵀJ)^p
///
/// evaluated through the equivalent channel-space system
/// R⁻¹Jᵀ (J R⁻¹ Jᵀ + λI)⁻¹ dv so that only a channels × channels SPD matrix is
/// factorised. Safe to share across threads once built.
class Reconstructor {
public:
    Reconstructor(const SensitivityMatrix& j, const ReconstructionOptions& options = {});
    ~Reconstructor();
    Reconstructor(Reconstructor&&) noexcept;
    Reconstructor& operator=(Reconstructor&&) noexcept;

    ReconstructionField operator()(const Eigen::VectorXd& delta_v) const;

    double lambda() const noexcept { return lambda_; }
    double p() const noexcept { return p_; }
    std::size_t floored_elements() const noexcept { return floored_; }

private:
    struct Factor;

    Eigen::MatrixXd weighted_jt_; ///< R⁻¹ Jᵀ (elements × channels)
    std::unique_ptr<Factor> factor_;
    double lambda_;
    double p_;
    std::size_t floored_ = 0;
};

/// One-shot convenience around Reconstructor.
ReconstructionField reconstruct(const SensitivityMatrix& j, const Eigen::VectorXd& delta_v, double lambda,
                                double p = 0.5);

/// Raster of a field sampled on a horizontal cutting plane (3D) or over the
/// mesh plane (2D). Row r covers y = y0 + (r + 0.5)·cell_height.
struct SliceRaster {
    int nx = 0;
    int ny = 0;
    double x0 = 0.0;
    double y0 = 0.0;
    double cell_width = 0.0;  ///< mm per cell
    double cell_height = 0.0; ///< mm per cell
    double fill = 0.0;
    std::vector<double> values;   ///< row-major, fill outside the domain
    std::vector<std::uint8_t> mask; ///< 1 inside the domain

    double at(int ix, int iy) const { return values[static_cast<std::size_t>(iy * nx + ix)]; }
    bool inside(int ix, int iy) const { return mask[static_cast<std::size_t>(iy * nx + ix)] != 0; }
    Vec3 cell_center(int ix, int iy, double z = 0.0) const {
        return {x0 + (ix + 0.5) * cell_width, y0 + (iy + 0.5) * cell_height, z};
    }
};

/// Samples the element containing each cell centre. `height` is ignored for
/// 2D meshes; for 3D meshes it must lie within the mesh z-extent.
SliceRaster slice_field(const ReconstructionField& field, const Mesh& mesh, double height, int nx, int ny);

/// Index of the element containing p, or -1 (brute force; slice_field uses a
/// bucketed search internally).
int locate_element(const Mesh& mesh, const Vec3& p);

struct RoiRatio {
    double ratio = 0.0;
    std::size_t region_elements = 0;
    bool degenerate = false; ///< whole-domain mean |value| was exactly zero
};

/// mean |value| over elements with centroid in `region`, divided by the mean
/// over all elements.
RoiRatio roi_response_ratio(const ReconstructionField& field, const Mesh& mesh, const EllipsoidInclusion& region);

/// CSV: element,value
void write_field_csv(std::ostream& out, const ReconstructionField& field);
/// CSV matrix, one line per raster row (lowest y first).
void write_slice_csv(std::ostream& out, const SliceRaster& raster);
/// Binary 8-bit PGM. In-domain cells are min-max scaled to 1..255 (constant
/// fields map to 128), outside cells are 0. The top image row is the highest y.
void write_slice_pgm(std::ostream& out, const SliceRaster& raster);

} // namespace padeit
