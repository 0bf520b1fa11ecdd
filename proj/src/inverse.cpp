#include "padeit/inverse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "padeit/csv.hpp"
#include "padeit/error.hpp"

namespace padeit {

struct Reconstructor::Factor {
    Eigen::LLT<Eigen::MatrixXd> llt;
};

double default_lambda(const SensitivityMatrix& j) {
    if (j.rows() == 0) throw DimensionError("sensitivity matrix has no rows");
    return 0.01 * j.entries.squaredNorm() / static_cast<double>(j.rows());
}

Reconstructor::Reconstructor(const SensitivityMatrix& j, const ReconstructionOptions& options)
    : factor_(std::make_unique<Factor>()), p_(options.p) {
    if (j.rows() == 0 || j.cols() == 0) throw DimensionError("sensitivity matrix is empty");
    if (!j.entries.allFinite()) throw DataError("sensitivity matrix has non-finite entries");
    if (!(p_ >= 0.0 && p_ <= 1.0)) throw InvalidArgument(fmt::format("p must lie in [0, 1] (got {})", p_));
    lambda_ = options.lambda.value_or(default_lambda(j));
    if (!(lambda_ > 0.0) || !std::isfinite(lambda_)) {
        throw InvalidArgument(fmt::format("lambda must be positive (got {})", lambda_));
    }

    const Eigen::VectorXd diag = j.entries.colwise().squaredNorm().transpose();
    Eigen::VectorXd prior = diag.array().pow(p_);
    const double floor = std::numeric_limits<double>::epsilon() * std::max(prior.maxCoeff(), 1e-300);
    for (Eigen::Index e = 0; e < prior.size(); ++e) {
        if (diag[e] == 0.0) {
            prior[e] = floor;
            ++floored_;
        }
    }
    weighted_jt_ = prior.cwiseInverse().asDiagonal() * j.entries.transpose();
    Eigen::MatrixXd system = j.entries * weighted_jt_;
    system.diagonal().array() += lambda_;
    factor_->llt.compute(system);
    if (factor_->llt.info() != Eigen::Success) throw SolverError("regularised system is not positive definite");
}

Reconstructor::~Reconstructor() = default;
Reconstructor::Reconstructor(Reconstructor&&) noexcept = default;
Reconstructor& Reconstructor::operator=(Reconstructor&&) noexcept = default;

ReconstructionField Reconstructor::operator()(const Eigen::VectorXd& delta_v) const {
    if (delta_v.size() != weighted_jt_.cols()) {
        throw DimensionError(fmt::format("difference vector has {} entries, sensitivity matrix has {} rows",
                                         delta_v.size(), weighted_jt_.cols()));
    }
    if (!delta_v.allFinite()) throw DataError("difference vector has non-finite entries");
    ReconstructionField field;
    field.values = weighted_jt_ * factor_->llt.solve(delta_v);
    field.lambda = lambda_;
    field.p = p_;
    field.floored_elements = floored_;
    field.degenerate = (delta_v.array() == 0.0).all();
    return field;
}

ReconstructionField reconstruct(const SensitivityMatrix& j, const Eigen::VectorXd& delta_v, double lambda, double p) {
    return Reconstructor(j, {lambda, p})(delta_v);
}

// --- Slicing ------------------------------------------------------------------

namespace {

bool element_contains(const Mesh& mesh, std::size_t e, const Vec3& p, double tol = 1e-9) {
    const auto& el = mesh.element(e);
    const Vec3& p0 = mesh.node(el[0]);
    if (mesh.dim() == 2) {
        Eigen::Matrix2d t;
        t.col(0) = (mesh.node(el[1]) - p0).head<2>();
        t.col(1) = (mesh.node(el[2]) - p0).head<2>();
        const Eigen::Vector2d l = t.inverse() * (p - p0).head<2>();
        return l.minCoeff() >= -tol && l.sum() <= 1.0 + tol;
    }
    Eigen::Matrix3d t;
    for (int k = 0; k < 3; ++k) t.col(k) = mesh.node(el[static_cast<std::size_t>(k + 1)]) - p0;
    const Eigen::Vector3d l = t.inverse() * (p - p0);
    return l.minCoeff() >= -tol && l.sum() <= 1.0 + tol;
}

std::pair<Vec3, Vec3> element_box(const Mesh& mesh, std::size_t e) {
    const auto& el = mesh.element(e);
    Vec3 lo = mesh.node(el[0]);
    Vec3 hi = lo;
    for (int v = 1; v < mesh.nodes_per_element(); ++v) {
        lo = lo.cwiseMin(mesh.node(el[static_cast<std::size_t>(v)]));
        hi = hi.cwiseMax(mesh.node(el[static_cast<std::size_t>(v)]));
    }
    return {lo, hi};
}

} // namespace

int locate_element(const Mesh& mesh, const Vec3& p) {
    for (std::size_t e = 0; e < mesh.element_count(); ++e) {
        if (element_contains(mesh, e, p)) return static_cast<int>(e);
    }
    return -1;
}

SliceRaster slice_field(const ReconstructionField& field, const Mesh& mesh, double height, int nx, int ny) {
    if (static_cast<std::size_t>(field.values.size()) != mesh.element_count()) {
        throw DimensionError("field length does not match element count");
    }
    if (nx < 1 || ny < 1) throw InvalidArgument("slice resolution must be at least 1x1");
    const auto& box = mesh.bounds();
    if (mesh.dim() == 3 && (height < box.lo.z() || height > box.hi.z())) {
        throw InvalidArgument(fmt::format("slice height {} outside mesh z-extent [{}, {}]", height, box.lo.z(),
                                          box.hi.z()));
    }
    const double z = mesh.dim() == 3 ? height : 0.0;

    SliceRaster raster;
    raster.nx = nx;
    raster.ny = ny;
    raster.x0 = box.lo.x();
    raster.y0 = box.lo.y();
    raster.cell_width = (box.hi.x() - box.lo.x()) / nx;
    raster.cell_height = (box.hi.y() - box.lo.y()) / ny;
    raster.values.assign(static_cast<std::size_t>(nx * ny), raster.fill);
    raster.mask.assign(static_cast<std::size_t>(nx * ny), 0);

    // Bucket the elements crossing the plane by their xy bounding boxes.
    const int buckets = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(mesh.element_count()) / 4.0)));
    const double bw = (box.hi.x() - box.lo.x()) / buckets;
    const double bh = (box.hi.y() - box.lo.y()) / buckets;
    auto bucket_of = [&](double v, double origin, double w) {
        return std::clamp(static_cast<int>(std::floor((v - origin) / w)), 0, buckets - 1);
    };
    std::vector<std::vector<int>> grid(static_cast<std::size_t>(buckets * buckets));
    for (std::size_t e = 0; e < mesh.element_count(); ++e) {
        const auto [lo, hi] = element_box(mesh, e);
        if (mesh.dim() == 3 && (z < lo.z() - 1e-9 || z > hi.z() + 1e-9)) continue;
        for (int by = bucket_of(lo.y(), box.lo.y(), bh); by <= bucket_of(hi.y(), box.lo.y(), bh); ++by)
            for (int bx = bucket_of(lo.x(), box.lo.x(), bw); bx <= bucket_of(hi.x(), box.lo.x(), bw); ++bx)
                grid[static_cast<std::size_t>(by * buckets + bx)].push_back(static_cast<int>(e));
    }

    for (int iy = 0; iy < ny; ++iy) {
        for (int ix = 0; ix < nx; ++ix) {
            const Vec3 c = raster.cell_center(ix, iy, z);
            const auto& cand = grid[static_cast<std::size_t>(bucket_of(c.y(), box.lo.y(), bh) * buckets +
                                                             bucket_of(c.x(), box.lo.x(), bw))];
            for (int e : cand) {
                if (element_contains(mesh, static_cast<std::size_t>(e), c)) {
                    const auto k = static_cast<std::size_t>(iy * nx + ix);
                    raster.values[k] = field.values[e];
                    raster.mask[k] = 1;
                    break;
                }
            }
        }
    }
    return raster;
}

RoiRatio roi_response_ratio(const ReconstructionField& field, const Mesh& mesh, const EllipsoidInclusion& region) {
    if (static_cast<std::size_t>(field.values.size()) != mesh.element_count()) {
        throw DimensionError("field length does not match element count");
    }
    RoiRatio out;
    double inside = 0.0;
    double total = 0.0;
    for (std::size_t e = 0; e < mesh.element_count(); ++e) {
        const double a = std::abs(field.values[static_cast<Eigen::Index>(e)]);
        total += a;
        if (region.contains(mesh.centroid(e))) {
            inside += a;
            ++out.region_elements;
        }
    }
    if (out.region_elements == 0) throw InvalidArgument("region of interest contains no element centroid");
    const double mean_all = total / static_cast<double>(mesh.element_count());
    const double mean_in = inside / static_cast<double>(out.region_elements);
    if (mean_all == 0.0) {
        out.ratio = std::numeric_limits<double>::infinity();
        out.degenerate = true;
    } else {
        out.ratio = mean_in / mean_all;
    }
    return out;
}

void write_field_csv(std::ostream& out, const ReconstructionField& field) {
    out << "element,value\n";
    for (Eigen::Index e = 0; e < field.values.size(); ++e) {
        out << e << ',' << format_number(field.values[e]) << '\n';
    }
}

void write_slice_csv(std::ostream& out, const SliceRaster& raster) {
    for (int iy = 0; iy < raster.ny; ++iy) {
        for (int ix = 0; ix < raster.nx; ++ix) {
            if (ix) out << ',';
            out << format_number(raster.at(ix, iy));
        }
        out << '\n';
    }
}

void write_slice_pgm(std::ostream& out, const SliceRaster& raster) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < raster.values.size(); ++k) {
        if (!raster.mask[k]) continue;
        lo = std::min(lo, raster.values[k]);
        hi = std::max(hi, raster.values[k]);
    }
    fmt::print(out, "P5\n{} {}\n255\n", raster.nx, raster.ny);
    std::vector<char> row(static_cast<std::size_t>(raster.nx));
    for (int iy = raster.ny - 1; iy >= 0; --iy) {
        for (int ix = 0; ix < raster.nx; ++ix) {
            std::uint8_t px = 0;
            if (raster.inside(ix, iy)) {
                px = hi > lo ? static_cast<std::uint8_t>(1 + std::lround(254.0 * (raster.at(ix, iy) - lo) / (hi - lo)))
                             : std::uint8_t{128};
            }
            row[static_cast<std::size_t>(ix)] = static_cast<char>(px);
        }
        out.write(row.data(), static_cast<std::streamsize>(row.size()));
    }
}

} // namespace padeit
