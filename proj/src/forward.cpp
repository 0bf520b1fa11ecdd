#include "padeit/forward.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <fmt/format.h>

#include "padeit/error.hpp"

namespace padeit {

namespace {

constexpr double kMetresPerMm = 1e-3;

using SparseMatrix = Eigen::SparseMatrix<double>;

void check_setup(const Mesh& mesh, const ElectrodeSet& electrodes, const ChannelPlan& plan) {
    if (static_cast<std::size_t>(plan.electrode_count()) != electrodes.size()) {
        throw DimensionError(fmt::format("plan expects {} electrodes, set has {}", plan.electrode_count(),
                                         electrodes.size()));
    }
    for (int n : electrodes.node_indices) {
        if (n < 0 || static_cast<std::size_t>(n) >= mesh.node_count()) {
            throw ValidationError(fmt::format("electrode node {} missing from mesh", n));
        }
    }
}

std::pair<int, int> node_pair(const ElectrodeSet& electrodes, int a, int b) {
    return {electrodes.node_indices[static_cast<std::size_t>(a)], electrodes.node_indices[static_cast<std::size_t>(b)]};
}

} // namespace

struct ForwardSolver::Factor {
    Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> llt;
};

int default_reference_node(const Mesh& mesh, const ElectrodeSet& electrodes) {
    for (int n : mesh.boundary_nodes()) {
        if (std::find(electrodes.node_indices.begin(), electrodes.node_indices.end(), n) ==
            electrodes.node_indices.end()) {
            return n;
        }
    }
    throw ValidationError("every boundary node is used by an electrode; no reference node available");
}

ForwardSolver::ForwardSolver(const Mesh& mesh, int reference_node)
    : mesh_(mesh), reference_(reference_node), factor_(std::make_unique<Factor>()) {
    const auto n_nodes = mesh.node_count();
    if (reference_node < 0 || static_cast<std::size_t>(reference_node) >= n_nodes) {
        throw ValidationError(fmt::format("reference node {} missing from mesh", reference_node));
    }
    reduced_.assign(n_nodes, -1);
    int next = 0;
    for (std::size_t n = 0; n < n_nodes; ++n) {
        if (static_cast<int>(n) != reference_node) reduced_[n] = next++;
    }

    const int dim = mesh.dim();
    const int nv = dim + 1;
    const double scale = std::pow(kMetresPerMm, dim);
    gradients_.resize(mesh.element_count());
    measures_si_.resize(mesh.element_count());
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(mesh.element_count() * static_cast<std::size_t>(nv * nv));
    const auto sigma = mesh.conductivity();

    for (std::size_t e = 0; e < mesh.element_count(); ++e) {
        const auto& el = mesh.element(e);
        Eigen::Matrix<double, 4, 3> grad = Eigen::Matrix<double, 4, 3>::Zero();
        const Vec3 p0 = mesh.node(el[0]) * kMetresPerMm;
        if (dim == 2) {
            Eigen::Matrix2d t;
            t.col(0) = (mesh.node(el[1]) * kMetresPerMm - p0).head<2>();
            t.col(1) = (mesh.node(el[2]) * kMetresPerMm - p0).head<2>();
            const Eigen::Matrix2d inv = t.inverse();
            grad.block<2, 2>(1, 0) = inv;
            grad.block<1, 2>(0, 0) = -inv.colwise().sum();
        } else {
            Eigen::Matrix3d t;
            for (int k = 0; k < 3; ++k) t.col(k) = mesh.node(el[static_cast<std::size_t>(k + 1)]) * kMetresPerMm - p0;
            const Eigen::Matrix3d inv = t.inverse();
            grad.block<3, 3>(1, 0) = inv;
            grad.row(0) = -inv.colwise().sum();
        }
        gradients_[e] = grad;
        measures_si_[e] = mesh.measure(e) * scale;

        const double w = sigma[e] * measures_si_[e];
        for (int a = 0; a < nv; ++a) {
            const int ra = reduced_[static_cast<std::size_t>(el[static_cast<std::size_t>(a)])];
            if (ra < 0) continue;
            for (int b = 0; b < nv; ++b) {
                const int rb = reduced_[static_cast<std::size_t>(el[static_cast<std::size_t>(b)])];
                if (rb < 0 || rb > ra) continue; // lower triangle only
                triplets.emplace_back(ra, rb, w * grad.row(a).dot(grad.row(b)));
            }
        }
    }
    SparseMatrix k(next, next);
    k.setFromTriplets(triplets.begin(), triplets.end());
    factor_->llt.compute(k);
    if (factor_->llt.info() != Eigen::Success) {
        throw SolverError("stiffness matrix is singular or not positive definite");
    }
}

ForwardSolver::~ForwardSolver() = default;
ForwardSolver::ForwardSolver(ForwardSolver&&) noexcept = default;
ForwardSolver& ForwardSolver::operator=(ForwardSolver&&) noexcept = default;

Eigen::MatrixXd ForwardSolver::potentials(std::span<const std::pair<int, int>> pairs, double current) const {
    const auto n_unknowns = static_cast<Eigen::Index>(mesh_.node_count() - 1);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n_unknowns, static_cast<Eigen::Index>(pairs.size()));
    for (std::size_t j = 0; j < pairs.size(); ++j) {
        const auto [source, sink] = pairs[j];
        for (int n : {source, sink}) {
            if (n < 0 || static_cast<std::size_t>(n) >= mesh_.node_count()) {
                throw ValidationError(fmt::format("injection node {} missing from mesh", n));
            }
        }
        if (const int r = reduced_[static_cast<std::size_t>(source)]; r >= 0) rhs(r, static_cast<Eigen::Index>(j)) += current;
        if (const int r = reduced_[static_cast<std::size_t>(sink)]; r >= 0) rhs(r, static_cast<Eigen::Index>(j)) -= current;
    }
    const Eigen::MatrixXd reduced = factor_->llt.solve(rhs);
    Eigen::MatrixXd full(static_cast<Eigen::Index>(mesh_.node_count()), reduced.cols());
    for (std::size_t n = 0; n < mesh_.node_count(); ++n) {
        const int r = reduced_[n];
        if (r < 0) full.row(static_cast<Eigen::Index>(n)).setZero();
        else full.row(static_cast<Eigen::Index>(n)) = reduced.row(r);
    }
    return full;
}

Eigen::VectorXd ForwardSolver::potential(int source, int sink, double current) const {
    const std::pair<int, int> pair{source, sink};
    return potentials(std::span(&pair, 1), current).col(0);
}

Eigen::Vector3d ForwardSolver::gradient(std::size_t e, const Eigen::VectorXd& field) const {
    const auto& el = mesh_.element(e);
    Eigen::Vector3d g = Eigen::Vector3d::Zero();
    for (int v = 0; v < mesh_.nodes_per_element(); ++v) {
        g += field[el[static_cast<std::size_t>(v)]] * gradients_[e].row(v).transpose();
    }
    return g;
}

FrameVector measure_frame(const ForwardSolver& solver, const ElectrodeSet& electrodes, const ChannelPlan& plan,
                          double current) {
    check_setup(solver.mesh(), electrodes, plan);
    std::map<std::pair<int, int>, Eigen::Index> column;
    std::vector<std::pair<int, int>> pairs;
    for (const auto& c : plan.channels()) {
        const auto key = node_pair(electrodes, c.inject_pos, c.inject_neg);
        if (column.emplace(key, static_cast<Eigen::Index>(pairs.size())).second) pairs.push_back(key);
    }
    const Eigen::MatrixXd u = solver.potentials(pairs, current);
    FrameVector frame(static_cast<Eigen::Index>(plan.size()));
    for (std::size_t i = 0; i < plan.size(); ++i) {
        const auto& c = plan[i];
        const Eigen::Index col = column.at(node_pair(electrodes, c.inject_pos, c.inject_neg));
        frame[static_cast<Eigen::Index>(i)] =
            u(electrodes.node_indices[static_cast<std::size_t>(c.sense_pos)], col) -
            u(electrodes.node_indices[static_cast<std::size_t>(c.sense_neg)], col);
    }
    return frame;
}

FrameVector solve_forward(const Mesh& mesh, const ElectrodeSet& electrodes, const ChannelPlan& plan, double current,
                          int reference_node) {
    if (!(current > 0.0) || !std::isfinite(current)) {
        throw InvalidArgument(fmt::format("injected current must be positive (got {})", current));
    }
    check_setup(mesh, electrodes, plan);
    if (reference_node < 0) reference_node = default_reference_node(mesh, electrodes);
    const ForwardSolver solver(mesh, reference_node);
    return measure_frame(solver, electrodes, plan, current);
}

SensitivityMatrix jacobian(const Mesh& mesh, const ElectrodeSet& electrodes, const ChannelPlan& plan,
                           int reference_node) {
    check_setup(mesh, electrodes, plan);
    if (reference_node < 0) reference_node = default_reference_node(mesh, electrodes);
    const ForwardSolver solver(mesh, reference_node);

    std::map<std::pair<int, int>, Eigen::Index> column;
    std::vector<std::pair<int, int>> pairs;
    auto intern = [&](int a, int b) {
        const auto key = node_pair(electrodes, a, b);
        if (column.emplace(key, static_cast<Eigen::Index>(pairs.size())).second) pairs.push_back(key);
    };
    for (const auto& c : plan.channels()) {
        intern(c.inject_pos, c.inject_neg);
        intern(c.sense_pos, c.sense_neg);
    }
    const Eigen::MatrixXd u = solver.potentials(pairs, 1.0);

    // Per-element gradient of every field, then one dot product per entry.
    const auto n_fields = static_cast<Eigen::Index>(pairs.size());
    const auto n_elements = static_cast<Eigen::Index>(mesh.element_count());
    std::vector<Eigen::Index> inject_col(plan.size());
    std::vector<Eigen::Index> sense_col(plan.size());
    for (std::size_t i = 0; i < plan.size(); ++i) {
        inject_col[i] = column.at(node_pair(electrodes, plan[i].inject_pos, plan[i].inject_neg));
        sense_col[i] = column.at(node_pair(electrodes, plan[i].sense_pos, plan[i].sense_neg));
    }
    SensitivityMatrix j;
    j.entries.resize(static_cast<Eigen::Index>(plan.size()), n_elements);
    const int nv = mesh.nodes_per_element();
    Eigen::MatrixXd local(nv, n_fields);
    Eigen::MatrixXd grads(3, n_fields);
    for (Eigen::Index e = 0; e < n_elements; ++e) {
        const auto ue = static_cast<std::size_t>(e);
        const auto& el = mesh.element(ue);
        for (int v = 0; v < nv; ++v) local.row(v) = u.row(el[static_cast<std::size_t>(v)]);
        grads.noalias() = solver.element_gradients(ue).topRows(nv).transpose() * local;
        const double vol = solver.measure_si(ue);
        for (std::size_t i = 0; i < plan.size(); ++i) {
            j.entries(static_cast<Eigen::Index>(i), e) = -vol * grads.col(inject_col[i]).dot(grads.col(sense_col[i]));
        }
    }
    return j;
}

FrameSeries simulate_series(std::span<const Mesh> meshes, const ElectrodeSet& electrodes, const ChannelPlan& plan,
                            double rate, double noise_sd, Rng& rng, double current) {
    if (meshes.empty()) throw InvalidArgument("mesh sequence is empty");
    if (!(rate > 0.0)) throw InvalidArgument(fmt::format("sampling rate must be positive (got {})", rate));
    if (!(noise_sd >= 0.0)) throw InvalidArgument(fmt::format("noise sd must be >= 0 (got {})", noise_sd));
    check_setup(meshes.front(), electrodes, plan);

    FrameSeries series;
    series.rate = rate;
    std::normal_distribution<double> noise(0.0, noise_sd > 0.0 ? noise_sd : 1.0);
    const Mesh* previous = nullptr;
    FrameVector clean;
    for (const auto& mesh : meshes) {
        const bool reuse = previous != nullptr && previous->same_topology(mesh) &&
                           std::equal(mesh.conductivity().begin(), mesh.conductivity().end(),
                                      previous->conductivity().begin());
        if (!reuse) clean = solve_forward(mesh, electrodes, plan, current);
        previous = &mesh;
        FrameVector frame = clean;
        if (noise_sd > 0.0) {
            for (Eigen::Index i = 0; i < frame.size(); ++i) frame[i] += noise(rng);
        }
        series.frames.push_back(std::move(frame));
    }
    return series;
}

} // namespace padeit
