#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "padeit/channels.hpp"
#include "padeit/electrodes.hpp"
#include "padeit/forward.hpp"
#include "padeit/geometry.hpp"
#include "padeit/inverse.hpp"

namespace padeit {

/// Random electrode disturbance applied to `degree` electrodes at once.
struct PerturbationSpec {
    int degree = 0;
    FactorRange impedance_factor{2.0, 5.0};
    double min_displacement = 5.0;  ///< mm
    double max_displacement = 20.0; ///< mm
    std::uint64_t seed = 0;

    /// Throws InvalidArgument unless 0 <= degree <= electrode_count and the
    /// ranges are ordered.
    void validate(std::size_t electrode_count) const;
};

struct PerturbedSetup {
    Mesh mesh;
    ElectrodeSet electrodes;
    std::vector<int> selected; ///< ascending electrode indices
};

/// Draws `spec.degree` electrodes without replacement, relocates them and then
/// applies a contact shift around their new attachment nodes.
PerturbedSetup perturb_trial(const Mesh& mesh, const ElectrodeSet& electrodes, const PerturbationSpec& spec,
                             Rng& rng);

/// Seed of one trial, derived from the master seed by hashing the
/// (volume, k, trial) tuple with splitmix64 finalisers. Independent of
/// generation order.
std::uint64_t trial_seed(std::uint64_t master, double volume_ml, int k, int trial);

/// Bladder shape and placement; the volume is supplied per scenario.
struct BladderModel {
    Vec3 center = Vec3::Zero();
    Vec3 aspect{1.0, 0.8, 0.6};
    double conductivity = 1.75;

    EllipsoidInclusion at_volume(double volume_ml) const {
        return volume_to_ellipsoid(volume_ml, aspect, center, conductivity);
    }
};

/// Everything needed to simulate one pad on one body.
struct Scenario {
    Mesh mesh; ///< background (empty bladder) conductivity
    ElectrodeSet electrodes;
    ChannelPlan plan;
    BladderModel bladder;
    double current = 1e-3; ///< A
};

struct DatasetRow {
    FrameVector features;
    double label_ml = 0.0;
    int group = 0; ///< perturbation degree k
    int trial = 0;
    std::uint64_t seed = 0;
};

struct LabeledDataset {
    std::vector<DatasetRow> rows;
    std::size_t channel_count = 0;

    std::size_t size() const noexcept { return rows.size(); }
    /// Distinct labels, ascending.
    std::vector<double> labels() const;
    /// Distinct groups, ascending.
    std::vector<int> groups() const;
    /// Throws DataError on ragged or non-finite rows.
    void validate() const;
    /// Rows whose label is in `labels`, order kept.
    LabeledDataset filter_labels(const std::vector<double>& labels) const;
};

struct DatasetOptions {
    std::vector<double> volumes{0.0, 200.0, 400.0};
    std::vector<int> degrees{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    int trials = 16;
    FactorRange impedance_factor{2.0, 5.0};
    double min_displacement = 5.0;
    double max_displacement = 20.0;
    double noise_sd = 0.0; ///< V, added to each trial frame
    std::uint64_t seed = 0;
    int threads = 1;
};

/// One row per (volume, k, trial), ordered by volume, then k, then trial. The
/// features are the trial frame minus the unperturbed empty-bladder frame.
LabeledDataset generate_dataset(const Scenario& scenario, const DatasetOptions& options);

/// CSV: ch_0..ch_{n-1},label_ml,k,trial,seed
void write_dataset_csv(std::ostream& out, const LabeledDataset& dataset);
LabeledDataset read_dataset_csv(std::istream& in);

struct LayoutResult {
    GridLayout layout;
    std::size_t channels = 0;
    std::size_t region_elements = 0;
    double ratio = 0.0;      ///< NaN when degenerate
    bool degenerate = false; ///< empty bladder: no difference signal
};

struct LayoutSweepOptions {
    std::string plan = "default";
    std::string diagonal = "squares";
    ReconstructionOptions reconstruction;
    double current = 1e-3;
    int threads = 1;
};

/// For each layout: place the pad, simulate the empty and the filled bladder,
/// reconstruct the difference and score it with roi_response_ratio.
std::vector<LayoutResult> layout_sweep(const Mesh& mesh, const std::vector<GridLayout>& layouts,
                                       const BladderModel& bladder, double volume_ml,
                                       const LayoutSweepOptions& options = {});

/// Runs f(i) for i in [0, n) on up to `threads` workers. The first exception
/// thrown by any task is rethrown after all workers finish.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& f);

} // namespace padeit
