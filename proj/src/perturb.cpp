#include "padeit/perturb.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <exception>
#include <istream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "padeit/csv.hpp"
#include "padeit/error.hpp"

namespace padeit {

void PerturbationSpec::validate(std::size_t electrode_count) const {
    if (degree < 0 || static_cast<std::size_t>(degree) > electrode_count) {
        throw InvalidArgument(fmt::format("perturbation degree {} outside [0, {}]", degree, electrode_count));
    }
    if (!(impedance_factor.low >= 1.0) || !(impedance_factor.high >= impedance_factor.low)) {
        throw InvalidArgument(fmt::format("impedance factor range [{}, {}] must satisfy 1 <= low <= high",
                                          impedance_factor.low, impedance_factor.high));
    }
    if (!(min_displacement >= 0.0) || !(max_displacement >= min_displacement) || !std::isfinite(max_displacement)) {
        throw InvalidArgument(fmt::format("displacement range [{}, {}] must satisfy 0 <= low <= high",
                                          min_displacement, max_displacement));
    }
}

PerturbedSetup perturb_trial(const Mesh& mesh, const ElectrodeSet& electrodes, const PerturbationSpec& spec,
                             Rng& rng) {
    spec.validate(electrodes.size());
    PerturbedSetup out{mesh, electrodes, {}};
    if (spec.degree == 0) return out;

    // partial Fisher-Yates over the electrode indices
    std::vector<int> pool(electrodes.size());
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < spec.degree; ++i) {
        std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), pool.size() - 1);
        std::swap(pool[static_cast<std::size_t>(i)], pool[pick(rng)]);
    }
    out.selected.assign(pool.begin(), pool.begin() + spec.degree);
    std::sort(out.selected.begin(), out.selected.end());

    out.electrodes = relocate(electrodes, mesh, out.selected, spec.max_displacement, rng,
                              {.min_displacement = spec.min_displacement});
    out.mesh = contact_shift(mesh, out.electrodes, out.selected, spec.impedance_factor, rng);
    return out;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

std::uint64_t trial_seed(std::uint64_t master, double volume_ml, int k, int trial) {
    // +0.0 so that -0 and 0 hash alike
    std::uint64_t h = splitmix64(master);
    h = splitmix64(h ^ std::bit_cast<std::uint64_t>(volume_ml + 0.0));
    h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(k)));
    h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(trial)));
    return h;
}

std::vector<double> LabeledDataset::labels() const {
    std::set<double> s;
    for (const auto& r : rows) s.insert(r.label_ml);
    return {s.begin(), s.end()};
}

std::vector<int> LabeledDataset::groups() const {
    std::set<int> s;
    for (const auto& r : rows) s.insert(r.group);
    return {s.begin(), s.end()};
}

void LabeledDataset::validate() const {
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (static_cast<std::size_t>(rows[i].features.size()) != channel_count) {
            throw DataError(fmt::format("row {} has {} features, expected {}", i, rows[i].features.size(),
                                        channel_count));
        }
        if (!rows[i].features.allFinite() || !std::isfinite(rows[i].label_ml)) {
            throw DataError(fmt::format("row {} has non-finite values", i));
        }
    }
}

LabeledDataset LabeledDataset::filter_labels(const std::vector<double>& keep) const {
    LabeledDataset out;
    out.channel_count = channel_count;
    for (const auto& r : rows) {
        if (std::find(keep.begin(), keep.end(), r.label_ml) != keep.end()) out.rows.push_back(r);
    }
    return out;
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& f) {
    const auto workers = static_cast<std::size_t>(std::clamp(threads, 1, 256));
    if (workers == 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                f(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = n;
            }
        }
    };
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(workers, n); ++w) pool.emplace_back(work);
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

LabeledDataset generate_dataset(const Scenario& scenario, const DatasetOptions& options) {
    if (options.trials < 1) throw InvalidArgument("trials per cell must be at least 1");
    if (options.volumes.empty()) throw InvalidArgument("at least one volume class is required");
    if (options.degrees.empty()) throw InvalidArgument("at least one perturbation degree is required");
    if (!(options.noise_sd >= 0.0)) throw InvalidArgument("noise_sd must be >= 0");
    for (double v : options.volumes) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument(fmt::format("invalid volume {}", v));
    }
    for (int k : options.degrees) {
        PerturbationSpec{k, options.impedance_factor, options.min_displacement, options.max_displacement, 0}
            .validate(scenario.electrodes.size());
    }

    struct Cell {
        double volume;
        int k;
        int trial;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    std::set<std::uint64_t> seeds;
    for (double v : options.volumes)
        for (int k : options.degrees)
            for (int t = 0; t < options.trials; ++t) {
                const auto s = trial_seed(options.seed, v, k, t);
                if (!seeds.insert(s).second) throw DataError("trial seed collision; choose another master seed");
                cells.push_back({v, k, t, s});
            }

    const FrameVector baseline = solve_forward(scenario.mesh, scenario.electrodes, scenario.plan, scenario.current);

    // Unperturbed frames per volume, shared by every k = 0 trial.
    std::map<double, FrameVector> clean;
    for (double v : options.volumes) {
        if (clean.count(v)) continue;
        const auto inc = scenario.bladder.at_volume(v);
        clean[v] = inc.empty() ? baseline
                               : solve_forward(apply_inclusion(scenario.mesh, inc), scenario.electrodes,
                                               scenario.plan, scenario.current);
    }

    LabeledDataset out;
    out.channel_count = scenario.plan.size();
    out.rows.resize(cells.size());
    parallel_for(cells.size(), options.threads, [&](std::size_t i) {
        const Cell& c = cells[i];
        Rng rng(c.seed);
        FrameVector frame;
        if (c.k == 0) {
            frame = clean.at(c.volume);
        } else {
            const auto inc = scenario.bladder.at_volume(c.volume);
            const Mesh filled = inc.empty() ? scenario.mesh : apply_inclusion(scenario.mesh, inc);
            const PerturbationSpec spec{c.k, options.impedance_factor, options.min_displacement,
                                        options.max_displacement, c.seed};
            const auto setup = perturb_trial(filled, scenario.electrodes, spec, rng);
            frame = solve_forward(setup.mesh, setup.electrodes, scenario.plan, scenario.current);
        }
        if (options.noise_sd > 0.0) {
            std::normal_distribution<double> noise(0.0, options.noise_sd);
            for (Eigen::Index j = 0; j < frame.size(); ++j) frame[j] += noise(rng);
        }
        out.rows[i] = {frame - baseline, c.volume, c.k, c.trial, c.seed};
    });
    return out;
}

void write_dataset_csv(std::ostream& out, const LabeledDataset& dataset) {
    for (std::size_t j = 0; j < dataset.channel_count; ++j) out << "ch_" << j << ',';
    out << "label_ml,k,trial,seed\n";
    for (const auto& r : dataset.rows) {
        for (Eigen::Index j = 0; j < r.features.size(); ++j) out << format_number(r.features[j]) << ',';
        fmt::print(out, "{},{},{},{}\n", format_number(r.label_ml), r.group, r.trial, r.seed);
    }
}

LabeledDataset read_dataset_csv(std::istream& in) {
    const CsvTable table = read_csv(in);
    const std::size_t label = table.column("label_ml");
    const std::size_t k = table.column("k");
    const std::size_t trial = table.column("trial");
    const std::size_t seed = table.column("seed");
    std::vector<std::size_t> channels;
    for (std::size_t j = 0; j < table.header.size(); ++j) {
        if (table.header[j].starts_with("ch_")) channels.push_back(j);
    }
    if (channels.empty()) throw DataError("dataset CSV has no ch_ columns");

    LabeledDataset out;
    out.channel_count = channels.size();
    int line = 1;
    for (const auto& row : table.rows) {
        ++line;
        DatasetRow r;
        r.features.resize(static_cast<Eigen::Index>(channels.size()));
        for (std::size_t j = 0; j < channels.size(); ++j) {
            r.features[static_cast<Eigen::Index>(j)] = parse_number(row[channels[j]], line);
        }
        r.label_ml = parse_number(row[label], line);
        r.group = static_cast<int>(parse_number(row[k], line));
        r.trial = static_cast<int>(parse_number(row[trial], line));
        try {
            r.seed = std::stoull(row[seed]);
        } catch (const std::exception&) {
            throw ParseError(fmt::format("invalid seed '{}'", row[seed]), line);
        }
        out.rows.push_back(std::move(r));
    }
    out.validate();
    return out;
}

std::vector<LayoutResult> layout_sweep(const Mesh& mesh, const std::vector<GridLayout>& layouts,
                                       const BladderModel& bladder, double volume_ml,
                                       const LayoutSweepOptions& options) {
    const auto inc = bladder.at_volume(volume_ml);
    const Mesh filled = inc.empty() ? mesh : apply_inclusion(mesh, inc);
    std::vector<LayoutResult> out(layouts.size());
    parallel_for(layouts.size(), options.threads, [&](std::size_t i) {
        const GridLayout& layout = layouts[i];
        layout.validate();
        const auto electrodes = place_grid(mesh, layout);
        const auto plan = plan_by_name(options.plan, layout, options.diagonal);
        LayoutResult r{layout, plan.size(), 0, std::numeric_limits<double>::quiet_NaN(), true};
        if (!inc.empty()) {
            const FrameVector v0 = solve_forward(mesh, electrodes, plan, options.current);
            const FrameVector v1 = solve_forward(filled, electrodes, plan, options.current);
            const auto field = Reconstructor(jacobian(mesh, electrodes, plan), options.reconstruction)(v1 - v0);
            if (!field.degenerate) {
                const auto roi = roi_response_ratio(field, mesh, inc);
                r.region_elements = roi.region_elements;
                r.ratio = roi.ratio;
                r.degenerate = roi.degenerate;
            }
        }
        out[i] = r;
    });
    return out;
}

} // namespace padeit
