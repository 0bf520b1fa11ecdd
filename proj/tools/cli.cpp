#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include "config.hpp"
#include "padeit/analysis.hpp"
#include "padeit/csv.hpp"
#include "padeit/error.hpp"
#include "padeit/forward.hpp"
#include "padeit/inverse.hpp"
#include "padeit/perturb.hpp"

namespace padeit::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Overrides {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::string input;
    std::string other;
    std::string operation;
};

ExperimentConfig resolve_config(const Overrides& o) {
    ExperimentConfig c;
    if (!o.config.empty()) {
        c = load_config(o.config);
    } else {
        if (!o.seed) throw ConfigError("either --config or --seed is required");
        c = parse_config(json{{"version", config_version}, {"seed", *o.seed}});
    }
    if (o.seed) c.seed = *o.seed;
    if (o.threads) {
        if (*o.threads < 1) throw ConfigError("--threads must be >= 1");
        c.threads = *o.threads;
    }
    if (!o.out.empty()) c.output = o.out;
    return c;
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError(fmt::format("cannot write '{}'", path.string()));
    body(f);
    f.flush();
    if (!f) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

template <class T>
T read_file(const std::string& path, const std::function<T(std::istream&)>& body) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError(fmt::format("cannot open '{}'", path));
    return body(f);
}

fs::path prepare_output(const ExperimentConfig& c) {
    const fs::path dir(c.output);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError(fmt::format("cannot create output directory '{}': {}", dir.string(), ec.message()));
    write_file(dir / "effective_config.json", [&](std::ostream& os) { os << to_json(c).dump(2) << '\n'; });
    return dir;
}

void write_key_values(std::ostream& os, const std::vector<std::pair<std::string, std::string>>& rows) {
    os << "key,value\n";
    for (const auto& [k, v] : rows) os << k << ',' << csv_field(v) << '\n';
}

std::string division_name(const std::vector<double>& classes) {
    std::string s;
    for (double v : classes) s += (s.empty() ? "" : "/") + format_number(v);
    return s;
}

Scenario make_scenario(const ExperimentConfig& c) {
    Mesh mesh = build_mesh(c.domain);
    auto electrodes = place_grid(mesh, c.layout);
    auto plan = plan_by_name(c.channels, c.layout, c.diagonal);
    return Scenario{std::move(mesh), std::move(electrodes), std::move(plan), c.domain.bladder, c.current};
}

void cmd_simulate(const ExperimentConfig& c, std::ostream& out) {
    const fs::path dir = prepare_output(c);
    const Scenario sc = make_scenario(c);
    const auto inc = c.domain.bladder.at_volume(c.domain.volume_ml);
    const Mesh filled = inc.empty() ? sc.mesh : apply_inclusion(sc.mesh, inc);

    FrameSeries frames;
    frames.frames.push_back(solve_forward(sc.mesh, sc.electrodes, sc.plan, c.current));
    frames.frames.push_back(inc.empty() ? frames.frames.front()
                                        : solve_forward(filled, sc.electrodes, sc.plan, c.current));
    const auto field = Reconstructor(jacobian(sc.mesh, sc.electrodes, sc.plan),
                                     c.reconstruction)(frames.frames[1] - frames.frames[0]);
    const double height = c.slice.height.value_or(c.domain.bladder.center.z());
    const auto raster = slice_field(field, sc.mesh, height, c.slice.nx, c.slice.ny);

    Eigen::Index peak = 0;
    field.values.cwiseAbs().maxCoeff(&peak);
    std::string ratio = "nan";
    std::string peak_inside = "false";
    std::size_t region = 0;
    if (!inc.empty()) {
        peak_inside = inc.contains(sc.mesh.centroid(static_cast<std::size_t>(peak))) ? "true" : "false";
        for (std::size_t e = 0; e < sc.mesh.element_count(); ++e) region += inc.contains(sc.mesh.centroid(e));
        if (region > 0 && !field.degenerate) ratio = format_number(roi_response_ratio(field, sc.mesh, inc).ratio);
    }

    write_file(dir / "electrodes.csv", [&](std::ostream& os) { write_electrodes_csv(os, sc.electrodes); });
    write_file(dir / "channels.csv", [&](std::ostream& os) { write_plan_csv(os, sc.plan); });
    write_file(dir / "frames.csv", [&](std::ostream& os) { write_series_csv(os, frames); });
    write_file(dir / "field.csv", [&](std::ostream& os) { write_field_csv(os, field); });
    write_file(dir / "slice.csv", [&](std::ostream& os) { write_slice_csv(os, raster); });
    write_file(dir / "slice.pgm", [&](std::ostream& os) { write_slice_pgm(os, raster); });
    write_file(dir / "summary.csv", [&](std::ostream& os) {
        write_key_values(os, {{"elements", std::to_string(sc.mesh.element_count())},
                              {"channels", std::to_string(sc.plan.size())},
                              {"volume_ml", format_number(c.domain.volume_ml)},
                              {"lambda", format_number(field.lambda)},
                              {"p", format_number(field.p)},
                              {"floored_elements", std::to_string(field.floored_elements)},
                              {"degenerate", field.degenerate ? "true" : "false"},
                              {"region_elements", std::to_string(region)},
                              {"roi_ratio", ratio},
                              {"peak_element", std::to_string(peak)},
                              {"peak_in_bladder", peak_inside},
                              {"slice_height", format_number(height)}});
    });
    fmt::print(out, "simulate: {} elements, {} channels, roi ratio {}{} -> {}\n", sc.mesh.element_count(),
               sc.plan.size(), ratio, field.degenerate ? " (degenerate)" : "", dir.string());
}

void cmd_sweep_layout(const ExperimentConfig& c, std::ostream& out) {
    const fs::path dir = prepare_output(c);
    const Mesh mesh = build_mesh(c.domain);
    std::vector<GridLayout> layouts;
    for (const auto& e : c.sweep_layout.layouts) {
        layouts.push_back({e.rows, e.cols, e.spacing, c.layout.origin, c.layout.orientation});
    }
    LayoutSweepOptions opts;
    opts.plan = c.channels;
    opts.diagonal = c.diagonal;
    opts.reconstruction = c.reconstruction;
    opts.current = c.current;
    opts.threads = c.threads;
    const auto results =
        layout_sweep(mesh, layouts, c.domain.bladder, c.sweep_layout.volume_ml.value_or(c.domain.volume_ml), opts);
    write_file(dir / "layouts.csv", [&](std::ostream& os) {
        os << "rows,cols,spacing,channels,region_elements,ratio,degenerate\n";
        for (const auto& r : results) {
            fmt::print(os, "{},{},{},{},{},{},{}\n", r.layout.rows, r.layout.cols, format_number(r.layout.spacing),
                       r.channels, r.region_elements, format_number(r.ratio), r.degenerate ? "true" : "false");
        }
    });
    for (const auto& r : results) {
        fmt::print(out, "{}x{} @ {} mm: {}\n", r.layout.rows, r.layout.cols, r.layout.spacing,
                   format_number(r.ratio));
    }
}

void write_accuracy_csv(std::ostream& os, const std::vector<std::pair<std::vector<double>, LooResult>>& results) {
    os << "division,group,n_train,n_test,accuracy\n";
    for (const auto& [classes, r] : results) {
        for (const auto& g : r.groups) {
            fmt::print(os, "{},{},{},{},{}\n", division_name(classes), g.group, g.n_train, g.n_test,
                       format_number(g.accuracy));
        }
    }
}

std::vector<std::pair<std::vector<double>, LooResult>> run_divisions(const ExperimentConfig& c,
                                                                     const LabeledDataset& ds) {
    std::vector<std::pair<std::vector<double>, LooResult>> results;
    for (const auto& division : c.classify.divisions) {
        results.emplace_back(division, evaluate_loo(ds, division, c.classify.classifier, c.threads));
    }
    return results;
}

void cmd_sweep_perturbation(const ExperimentConfig& c, std::ostream& out) {
    const fs::path dir = prepare_output(c);
    const Scenario sc = make_scenario(c);
    const auto& pc = c.perturbation;
    DatasetOptions opts;
    opts.volumes = pc.volumes;
    opts.degrees = pc.degrees;
    opts.trials = pc.trials;
    opts.impedance_factor = pc.impedance_factor;
    opts.min_displacement = pc.min_displacement;
    opts.max_displacement = pc.max_displacement;
    opts.noise_sd = pc.noise_sd;
    opts.seed = c.seed;
    opts.threads = c.threads;
    const auto ds = generate_dataset(sc, opts);
    write_file(dir / "dataset.csv", [&](std::ostream& os) { write_dataset_csv(os, ds); });

    std::vector<std::vector<double>> usable;
    for (const auto& d : c.classify.divisions) {
        if (ds.filter_labels(d).labels().size() == d.size()) usable.push_back(d);
    }
    ExperimentConfig local = c;
    local.classify.divisions = usable;
    const auto results = ds.groups().size() >= 2 ? run_divisions(local, ds)
                                                  : std::vector<std::pair<std::vector<double>, LooResult>>{};
    write_file(dir / "accuracy.csv", [&](std::ostream& os) { write_accuracy_csv(os, results); });
    fmt::print(out, "sweep-perturbation: {} rows -> {}\n", ds.size(), dir.string());
    for (const auto& [classes, r] : results) {
        fmt::print(out, "  {}-class mean accuracy {}\n", classes.size(), format_number(r.mean_accuracy));
    }
}

FrameSeries load_series(const std::string& path) {
    return read_file<FrameSeries>(path, [](std::istream& in) { return read_series_csv(in); });
}

void cmd_analyze(const ExperimentConfig& c, std::ostream& out) {
    const auto& a = c.analyze;
    if (!a.input) throw ConfigError("analyze needs an input series (--input or analyze.input)");
    const fs::path dir = prepare_output(c);
    const FrameSeries series = load_series(*a.input);
    const fs::path target = dir / "analysis.csv";
    if (a.operation == "baseline") {
        const auto result = baseline_subtract(series);
        write_file(target, [&](std::ostream& os) { write_series_csv(os, result); });
    } else if (a.operation == "group") {
        const auto result = group_average(series, a.group_size);
        write_file(target, [&](std::ostream& os) { write_series_csv(os, result); });
    } else if (a.operation == "normalize") {
        std::vector<double> curve;
        for (const auto& f : series.frames) curve.push_back(f.mean());
        const auto norm = normalize_to_start(curve);
        write_file(target, [&](std::ostream& os) {
            os << "timestamp,value,normalized\n";
            for (std::size_t i = 0; i < curve.size(); ++i) {
                fmt::print(os, "{},{},{}\n", format_number(series.timestamp(i)), format_number(curve[i]),
                           format_number(norm[i]));
            }
        });
    } else {
        if (!a.other) throw ConfigError("analyze compare needs a second series (--other or analyze.other)");
        const FrameSeries other = load_series(*a.other);
        const auto x = window_mean(series, a.window_seconds);
        const auto y = window_mean(other, a.window_seconds);
        const double cos = cosine_similarity(x, y);
        const double r = pearson(x, y);
        write_file(target, [&](std::ostream& os) {
            os << "cosine,pearson\n";
            fmt::print(os, "{},{}\n", format_number(cos), format_number(r));
        });
    }
    fmt::print(out, "analyze {}: -> {}\n", a.operation, target.string());
}

void cmd_classify(const ExperimentConfig& c, std::ostream& out) {
    const auto& cc = c.classify;
    if (!cc.dataset) throw ConfigError("classify needs a dataset (--input or classify.dataset)");
    const fs::path dir = prepare_output(c);
    const auto ds = read_file<LabeledDataset>(*cc.dataset, [](std::istream& in) { return read_dataset_csv(in); });

    const auto results = run_divisions(c, ds);
    write_file(dir / "accuracy.csv", [&](std::ostream& os) { write_accuracy_csv(os, results); });

    LabeledDataset binary;
    binary.channel_count = ds.channel_count;
    for (const auto& r : ds.rows) {
        if (!cc.binary_max_degree || r.group <= *cc.binary_max_degree) binary.rows.push_back(r);
    }
    const auto eval = binary_fullness_eval(binary, cc.v_low, cc.v_high, cc.classifier, c.threads);
    write_file(dir / "roc.csv", [&](std::ostream& os) { write_roc_csv(os, eval.roc); });
    write_file(dir / "binary.csv", [&](std::ostream& os) {
        write_key_values(os, {{"v_low", format_number(cc.v_low)},
                              {"v_high", format_number(cc.v_high)},
                              {"positives", std::to_string(eval.positives)},
                              {"negatives", std::to_string(eval.negatives)},
                              {"auc", format_number(eval.auc)},
                              {"accuracy", format_number(eval.accuracy)}});
    });
    for (const auto& [classes, r] : results) {
        fmt::print(out, "{}-class mean accuracy {}\n", classes.size(), format_number(r.mean_accuracy));
    }
    fmt::print(out, "binary {} vs {} mL: auc {} accuracy {}\n", cc.v_low, cc.v_high, format_number(eval.auc),
               format_number(eval.accuracy));
}

void print_error(std::ostream& err, const std::string& kind, const std::string& message) {
    err << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"EIT bladder-pad simulation and analysis toolkit", "padeit"};
    app.require_subcommand(1);
    Overrides o;
    std::uint64_t seed = 0;
    int threads = 1;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "experiment config (JSON)")->check(CLI::ExistingFile);
        sub->add_option("--out", o.out, "output directory (overrides config)");
        sub->add_option("--seed", seed, "master seed (overrides config)");
        sub->add_option("--threads", threads, "worker threads (overrides config)");
    };
    auto* simulate = app.add_subcommand("simulate", "empty/full frames, reconstruction and slice");
    auto* sweep_layout = app.add_subcommand("sweep-layout", "RoI response ratio per pad layout");
    auto* sweep_perturbation = app.add_subcommand("sweep-perturbation", "perturbed dataset and accuracy per k");
    auto* analyze = app.add_subcommand("analyze", "frame-series conditioning and comparison");
    auto* classify = app.add_subcommand("classify", "leave-one-group-out and binary fullness evaluation");
    for (auto* sub : {simulate, sweep_layout, sweep_perturbation, analyze, classify}) common(sub);
    analyze->add_option("operation", o.operation, "baseline | group | normalize | compare")
        ->check(CLI::IsMember({"baseline", "group", "normalize", "compare"}));
    analyze->add_option("--input", o.input, "frame series CSV");
    analyze->add_option("--other", o.other, "second frame series CSV (compare)");
    classify->add_option("--input", o.input, "dataset CSV");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        print_error(err, "usage_error", e.what());
        return 2;
    }

    auto* active = app.get_subcommands().front();
    if (active->count("--seed")) o.seed = seed;
    if (active->count("--threads")) o.threads = threads;

    try {
        ExperimentConfig c = resolve_config(o);
        if (active == analyze) {
            if (!o.operation.empty()) c.analyze.operation = o.operation;
            if (!o.input.empty()) c.analyze.input = fs::absolute(o.input).lexically_normal().string();
            if (!o.other.empty()) c.analyze.other = fs::absolute(o.other).lexically_normal().string();
            cmd_analyze(c, out);
        } else if (active == classify) {
            if (!o.input.empty()) c.classify.dataset = fs::absolute(o.input).lexically_normal().string();
            cmd_classify(c, out);
        } else if (active == simulate) {
            cmd_simulate(c, out);
        } else if (active == sweep_layout) {
            cmd_sweep_layout(c, out);
        } else {
            cmd_sweep_perturbation(c, out);
        }
    } catch (const Error& e) {
        print_error(err, e.kind(), e.what());
        return 1;
    } catch (const std::exception& e) {
        print_error(err, "internal_error", e.what());
        return 1;
    }
    return 0;
}

} // namespace padeit::cli
