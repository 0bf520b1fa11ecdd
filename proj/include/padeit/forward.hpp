#pragma once

#include <memory>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "padeit/channels.hpp"
#include "padeit/electrodes.hpp"
#include "padeit/frames.hpp"
#include "padeit/geometry.hpp"

namespace padeit {

/// Channels × elements matrix of d(channel voltage)/d(element conductivity)
/// for unit injected current, in V per (S/m).
struct SensitivityMatrix {
    Eigen::MatrixXd entries;

    Eigen::Index rows() const noexcept { return entries.rows(); }
    Eigen::Index cols() const noexcept { return entries.cols(); }
};

/// Lowest-index boundary node not used by any electrode.
int default_reference_node(const Mesh& mesh, const ElectrodeSet& electrodes);

/// Linear finite-element model of div(sigma grad u) = 0 with point-electrode
/// current injection and one grounded node. The stiffness matrix is
/// factorised once at construction; every solve reuses the factor.
class ForwardSolver {
public:
    ForwardSolver(const Mesh& mesh, int reference_node);
    ~ForwardSolver();
    ForwardSolver(ForwardSolver&&) noexcept;
    ForwardSolver& operator=(ForwardSolver&&) noexcept;

    const Mesh& mesh() const noexcept { return mesh_; }
    int reference_node() const noexcept { return reference_; }

    /// Nodal potentials (V) for `current` amperes entering at `source` and
    /// leaving at `sink`.
    Eigen::VectorXd potential(int source, int sink, double current) const;

    /// One potential column per (source, sink) pair.
    Eigen::MatrixXd potentials(std::span<const std::pair<int, int>> pairs, double current) const;

    /// Gradient (1/m) of a nodal field over element e.
    Eigen::Vector3d gradient(std::size_t e, const Eigen::VectorXd& field) const;
    /// Rows are the gradients (1/m) of the element's nodal basis functions;
    /// triangles use the first three rows.
    const Eigen::Matrix<double, 4, 3>& element_gradients(std::size_t e) const { return gradients_[e]; }
    /// Element measure in m^2 (2D, unit thickness) or m^3.
    double measure_si(std::size_t e) const { return measures_si_[e]; }

private:
    struct Factor;

    Mesh mesh_;
    int reference_;
    std::vector<int> reduced_; ///< node -> unknown index, -1 for the ground
    std::vector<Eigen::Matrix<double, 4, 3>> gradients_;
    std::vector<double> measures_si_;
    std::unique_ptr<Factor> factor_;
};

/// Voltages for every channel of `plan` from an existing factorisation.
/// Solves once per distinct injection pair.
FrameVector measure_frame(const ForwardSolver& solver, const ElectrodeSet& electrodes, const ChannelPlan& plan,
                          double current);

FrameVector solve_forward(const Mesh& mesh, const ElectrodeSet& electrodes, const ChannelPlan& plan,
                          double current = 1e-3, int reference_node = -1);

/// Adjoint-field sensitivity: entry (i, e) = -integral over e of
/// grad u_inject(i) . grad u_sense(i), both fields driven by unit current.
SensitivityMatrix jacobian(const Mesh& mesh, const ElectrodeSet& electrodes, const ChannelPlan& plan,
                           int reference_node = -1);

/// Frame per mesh plus i.i.d. zero-mean Gaussian noise (V). Consecutive meshes
/// with identical conductivity reuse the previous solve.
FrameSeries simulate_series(std::span<const Mesh> meshes, const ElectrodeSet& electrodes, const ChannelPlan& plan,
                            double rate, double noise_sd, Rng& rng, double current = 1e-3);

} // namespace padeit
