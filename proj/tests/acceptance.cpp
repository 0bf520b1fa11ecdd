// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <unistd.h>

#include <fmt/format.h>
#include <json.hpp>

#include "cli.hpp"
#include "config.hpp"
#include "padeit/analysis.hpp"
#include "padeit/channels.hpp"
#include "padeit/forward.hpp"
#include "padeit/inverse.hpp"
#include "padeit/perturb.hpp"

using namespace padeit;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
    if (!pass) ++failures;
    std::cout << fmt::format("CRITERION {}: {} - {}", id, pass ? "PASS" : "FAIL", detail) << std::endl;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

std::vector<Channel> random_channels(int count, int electrodes, std::mt19937& rng) {
    std::uniform_int_distribution<int> pick(0, electrodes - 1);
    std::set<Channel> seen;
    std::vector<Channel> out;
    while (static_cast<int>(out.size()) < count) {
        const int a = pick(rng), b = pick(rng), c = pick(rng), d = pick(rng);
        if (a == b || a == c || a == d || b == c || b == d || c == d) continue;
        const auto ch = Channel::make(a, b, c, d);
        if (seen.insert(ch).second) out.push_back(ch);
    }
    return out;
}

Mesh heterogeneous(const Mesh& m, double base, double amplitude) {
    std::vector<double> sigma(m.element_count());
    for (std::size_t e = 0; e < sigma.size(); ++e) sigma[e] = base + amplitude * std::sin(0.37 * static_cast<double>(e));
    return m.with_conductivity(std::move(sigma));
}

void criterion1() {
    const auto t0 = Clock::now();
    const GridLayout g{3, 3, 60.0, Vec3::Zero(), Vec3::UnitX()};
    const auto all = enumerate_all(9).size();
    const auto rect = rectangle_channels(g).size();
    const auto plan = default_plan(g).size();
    const double t = seconds_since(t0);
    report(1, all == 756 && rect == 36 && plan == 48 && t < 1.0,
           fmt::format("all={} rectangle={} default={} in {:.3f} s", all, rect, plan, t));
}

void criterion2() {
    const Mesh mesh = heterogeneous(generate_cylinder_mesh(60.0, 80.0, 1800), 0.2, 0.08);
    const auto el = place_grid(mesh, GridLayout{3, 3, 25.0, Vec3(0.0, -60.0, 40.0), Vec3::UnitX()});
    std::mt19937 rng(2);
    const auto chans = random_channels(24, 9, rng);
    std::vector<Channel> swapped;
    for (const auto& c : chans) swapped.push_back(c.swapped_roles());
    const ChannelPlan plan(chans, 9), swapped_plan(swapped, 9);

    const int ref = default_reference_node(mesh, el);
    int other = -1;
    for (std::size_t n = mesh.node_count(); n-- > 0;) {
        if (!mesh.is_boundary(static_cast<int>(n))) {
            other = static_cast<int>(n);
            break;
        }
    }
    std::vector<double> scaled(mesh.conductivity().begin(), mesh.conductivity().end());
    for (auto& s : scaled) s *= 3.0;

    const auto v = solve_forward(mesh, el, plan, 1e-3, ref);
    const auto recip = solve_forward(mesh, el, swapped_plan, 1e-3, ref);
    const auto doubled = solve_forward(mesh, el, plan, 2e-3, ref);
    const auto stiffer = solve_forward(mesh.with_conductivity(scaled), el, plan, 1e-3, ref);
    const auto moved = solve_forward(mesh, el, plan, 1e-3, other);
    double e_recip = 0, e_homog = 0, e_ref = 0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        e_recip = std::max(e_recip, rel(v[i], recip[i]));
        e_homog = std::max({e_homog, rel(2.0 * v[i], doubled[i]), rel(v[i], 3.0 * stiffer[i])});
        e_ref = std::max(e_ref, rel(v[i], moved[i]));
    }
    report(2, mesh.element_count() <= 2000 && e_recip <= 1e-8 && e_homog <= 1e-10 && e_ref <= 1e-8,
           fmt::format("{} channels on {} elements: reciprocity {:.2e}, homogeneity {:.2e}, reference {:.2e}",
                       chans.size(), mesh.element_count(), e_recip, e_homog, e_ref));
}

void criterion3() {
    const Mesh mesh = heterogeneous(generate_cylinder_mesh(50.0, 60.0, 400), 0.2, 0.1);
    const GridLayout layout{3, 3, 25.0, Vec3(0.0, -50.0, 30.0), Vec3::UnitX()};
    const auto el = place_grid(mesh, layout);
    const auto plan = default_plan(layout);
    const auto j = jacobian(mesh, el, plan);
    std::mt19937 rng(3);
    std::uniform_int_distribution<std::size_t> row(0, plan.size() - 1), col(0, mesh.element_count() - 1);
    const std::vector<double> sigma(mesh.conductivity().begin(), mesh.conductivity().end());
    double worst = 0.0;
    const int pairs = 24;
    for (int t = 0; t < pairs; ++t) {
        const std::size_t i = row(rng), e = col(rng);
        const ChannelPlan one({plan.channels()[i]}, 9);
        const double h = 1e-4 * sigma[e];
        auto up = sigma, down = sigma;
        up[e] += h;
        down[e] -= h;
        const double fd = (solve_forward(mesh.with_conductivity(up), el, one, 1.0)[0] -
                           solve_forward(mesh.with_conductivity(down), el, one, 1.0)[0]) /
                          (2.0 * h);
        worst = std::max(worst, rel(j.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(e)), fd));
    }
    report(3, mesh.element_count() <= 500 && worst < 1e-4,
           fmt::format("{} pairs on {} elements: max relative error {:.2e}", pairs, mesh.element_count(), worst));
}

struct Acceptance {
    cli::ExperimentConfig config;
    Scenario scenario;
};

Acceptance default_scenario() {
    auto c = cli::parse_config(nlohmann::json{{"version", cli::config_version}, {"seed", 7}});
    Mesh mesh = cli::build_mesh(c.domain);
    auto el = place_grid(mesh, c.layout);
    auto plan = plan_by_name(c.channels, c.layout, c.diagonal);
    return {c, Scenario{std::move(mesh), std::move(el), std::move(plan), c.domain.bladder, c.current}};
}

void criterion4and6(const Acceptance& a) {
    const auto t0 = Clock::now();
    const auto& c = a.config;
    std::vector<GridLayout> layouts;
    for (const auto& e : c.sweep_layout.layouts) layouts.push_back({e.rows, e.cols, e.spacing, c.layout.origin, c.layout.orientation});
    const auto r = layout_sweep(a.scenario.mesh, layouts, c.domain.bladder, 100.0);
    std::map<std::string, double> ratio;
    for (const auto& x : r) ratio[fmt::format("{}x{}@{}", x.layout.rows, x.layout.cols, x.layout.spacing)] = x.ratio;
    const double r24 = ratio.at("2x4@60"), r33 = ratio.at("3x3@60"), r34 = ratio.at("3x4@60"),
                 r44 = ratio.at("4x4@60"), s30 = ratio.at("3x3@30"), s45 = ratio.at("3x3@45");
    const double t = seconds_since(t0);
    const bool big = a.scenario.mesh.element_count() >= 10000 && a.scenario.mesh.dim() == 3;
    report(4, big && r24 < r33 && r33 < r34 && r44 >= 0.9 * r34 && s30 < s45 && s45 < r33 && t < 900.0,
           fmt::format("{} elements; 2x4 {:.3f} < 3x3 {:.3f} < 3x4 {:.3f}, 4x4 {:.3f} >= 0.9*3x4; "
                       "30mm {:.3f} < 45mm {:.3f} < 60mm {:.3f}; {:.0f} s",
                       a.scenario.mesh.element_count(), r24, r33, r34, r44, s30, s45, r33, t));

    // single 3x3 reconstruction at 100 mL, k = 0
    const auto& sc = a.scenario;
    const auto inc = sc.bladder.at_volume(100.0);
    const auto v0 = solve_forward(sc.mesh, sc.electrodes, sc.plan, sc.current);
    const auto v1 = solve_forward(apply_inclusion(sc.mesh, inc), sc.electrodes, sc.plan, sc.current);
    const auto field = Reconstructor(jacobian(sc.mesh, sc.electrodes, sc.plan), c.reconstruction)(v1 - v0);
    Eigen::Index peak = 0;
    field.values.cwiseAbs().maxCoeff(&peak);
    const bool inside = inc.contains(sc.mesh.centroid(static_cast<std::size_t>(peak)));
    const double roi = roi_response_ratio(field, sc.mesh, inc).ratio;
    report(6, inside && roi > 1.5,
           fmt::format("peak element {} {} the ellipsoid, RoI ratio {:.3f}", peak, inside ? "inside" : "outside", roi));
}

LabeledDataset criterion5(const Acceptance& a) {
    const auto t0 = Clock::now();
    const auto& pc = a.config.perturbation;
    DatasetOptions o;
    o.volumes = {0.0, 100.0, 200.0, 300.0, 400.0};
    o.degrees = pc.degrees;
    o.trials = 16;
    o.impedance_factor = pc.impedance_factor;
    o.min_displacement = pc.min_displacement;
    o.max_displacement = pc.max_displacement;
    o.noise_sd = pc.noise_sd;
    o.seed = a.config.seed;
    const auto ds = generate_dataset(a.scenario, o);
    const auto three = evaluate_loo(ds, {0.0, 200.0, 400.0});
    const auto five = evaluate_loo(ds, {0.0, 100.0, 200.0, 300.0, 400.0});
    const double t = seconds_since(t0);

    auto at = [](const LooResult& r, int k) {
        for (const auto& g : r.groups)
            if (g.group == k) return g.accuracy;
        return std::nan("");
    };
    std::string curve3, curve5;
    for (int k = 0; k <= 9; ++k) {
        curve3 += fmt::format(" {:.3f}", at(three, k));
        curve5 += fmt::format(" {:.3f}", at(five, k));
    }
    const double a3 = 100.0 * at(three, 9), a5 = 100.0 * at(five, 9);
    const bool ok_a = at(three, 0) == 1.0 && at(five, 0) == 1.0;
    const bool ok_b = a3 >= a5;
    const bool ok_c = std::abs(a3 - 89.6) <= 10.0 && std::abs(a5 - 58.8) <= 15.0;
    report(5, ok_a && ok_b && ok_c && t < 3600.0,
           fmt::format("k=0 {}; 3-class k=9 {:.1f}% (89.6 +/- 10), 5-class k=9 {:.1f}% (58.8 +/- 15); "
                       "3-class per k:{}; 5-class per k:{}; {:.0f} s",
                       ok_a ? "1.00/1.00" : "below 1.00", a3, a5, curve3, curve5, t));
    return ds;
}

void criterion7() {
    std::vector<std::string> bad;
    FrameSeries s;
    s.rate = 3.0;
    for (int i = 0; i < 7; ++i) s.frames.push_back(Eigen::Vector3d(1.0 + i, 2.0 * i, 5.0 - i));
    if (baseline_subtract(s).frames.front() != FrameVector::Zero(3)) bad.push_back("baseline");
    if (group_average(s, 3).size() != 2) bad.push_back("group_average");

    std::mt19937 rng(7);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int t = 0; t < 20; ++t) {
        Eigen::VectorXd x(48), y(48);
        for (auto& v : x) v = n(rng);
        for (auto& v : y) v = n(rng) + 0.5 * t;
        const double cos = x.dot(y) / (x.norm() * y.norm());
        const Eigen::VectorXd xc = x.array() - x.mean(), yc = y.array() - y.mean();
        const double r = xc.dot(yc) / (xc.norm() * yc.norm());
        if (std::abs(cosine_similarity(x, x) - 1.0) > 1e-12 || std::abs(pearson(x, x) - 1.0) > 1e-12 ||
            std::abs(cosine_similarity(x, y) - cos) > 1e-6 || std::abs(pearson(x, y) - r) > 1e-6) {
            bad.push_back("similarity");
            break;
        }
    }
    int auc_mismatch = 0;
    std::mt19937_64 r64(99);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> scores;
        std::vector<int> truth;
        const int count = 10 + static_cast<int>(r64() % 50);
        for (int i = 0; i < count; ++i) {
            truth.push_back(i < 2 ? i : static_cast<int>(r64() % 2));
            scores.push_back(static_cast<double>(r64() % 12) / 4.0);
        }
        if (roc_auc(scores, truth) != mann_whitney_auc(scores, truth)) ++auc_mismatch;
    }
    if (auc_mismatch) bad.push_back(fmt::format("auc ({} mismatches)", auc_mismatch));
    std::string detail = "baseline, group_average, cosine/pearson, AUC == Mann-Whitney on 100 sets";
    if (!bad.empty()) {
        detail = "failed:";
        for (const auto& b : bad) detail += " " + b;
    }
    report(7, bad.empty(), detail);
}

std::map<std::string, std::string> outputs(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto ext = e.path().extension();
        if (ext != ".csv" && ext != ".pgm") continue;
        std::ifstream in(e.path(), std::ios::binary);
        files[e.path().filename().string()] = {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    }
    return files;
}

void criterion8() {
    const fs::path tmp = fs::temp_directory_path() / fmt::format("padeit_acceptance_{}", ::getpid());
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    const auto config = nlohmann::json::parse(R"({
        "version": 1, "seed": 3,
        "domain": {"generator": {"type": "cylinder", "radius": 60, "height": 80, "target_elements": 1200},
                   "bladder": {"center": [10, -35, 20]}, "volume_ml": 20},
        "layout": {"rows": 3, "cols": 3, "spacing": 25, "origin": [0, -60, 40]},
        "slice": {"nx": 24, "ny": 24},
        "sweep_layout": {"layouts": [{"rows": 2, "cols": 3, "spacing": 25}, {"rows": 3, "cols": 3, "spacing": 25}]},
        "perturbation": {"volumes": [0, 10, 20], "degrees": [0, 1, 3], "trials": 3, "noise_sd": 1e-6},
        "classify": {"divisions": [[0, 20], [0, 10, 20]], "v_low": 0, "v_high": 20}
    })");
    const fs::path cfg = tmp / "config.json";
    std::ofstream(cfg) << config.dump(2);
    {
        std::ofstream f(tmp / "series.csv");
        FrameSeries s;
        for (int i = 0; i < 9; ++i) s.frames.push_back(Eigen::Vector3d(1.0 + i, 2.0 + 0.5 * i * i, 3.0 - 0.1 * i));
        write_series_csv(f, s);
    }
    const std::vector<std::pair<std::string, std::vector<std::string>>> commands{
        {"simulate", {"simulate"}},
        {"sweep-layout", {"sweep-layout"}},
        {"sweep-perturbation", {"sweep-perturbation"}},
        {"classify", {"classify", "--input", (tmp / "sweep-perturbation0" / "dataset.csv").string()}},
        {"analyze baseline", {"analyze", "baseline", "--input", (tmp / "series.csv").string()}},
        {"analyze group", {"analyze", "group", "--input", (tmp / "series.csv").string()}},
        {"analyze normalize", {"analyze", "normalize", "--input", (tmp / "series.csv").string()}},
        {"analyze compare",
         {"analyze", "compare", "--input", (tmp / "series.csv").string(), "--other", (tmp / "series.csv").string()}},
    };
    std::vector<std::string> differing;
    std::size_t files = 0;
    for (const auto& [name, args] : commands) {
        std::map<std::string, std::string> first;
        for (int round = 0; round < 2; ++round) {
            std::string dir = name;
            std::replace(dir.begin(), dir.end(), ' ', '_');
            auto full = args;
            full.insert(full.end(), {"--config", cfg.string(), "--out", (tmp / (dir + std::to_string(round))).string()});
            std::ostringstream out, err;
            if (cli::run(full, out, err) != 0) {
                differing.push_back(name + " (failed: " + err.str() + ")");
                break;
            }
            const auto produced = outputs(tmp / (dir + std::to_string(round)));
            if (round == 0) {
                first = produced;
                files += produced.size();
            } else if (produced != first || produced.empty()) {
                differing.push_back(name);
            }
        }
    }
    fs::remove_all(tmp);
    std::string detail = fmt::format("{} subcommands, {} CSV/PGM files byte-identical across two runs",
                                     commands.size(), files);
    if (!differing.empty()) {
        detail = "differs:";
        for (const auto& d : differing) detail += " [" + d + "]";
    }
    report(8, differing.empty(), detail);
}

void criterion9(const LabeledDataset& ds) {
    LabeledDataset low_k;
    low_k.channel_count = ds.channel_count;
    for (const auto& r : ds.rows) {
        if (r.group <= 3) low_k.rows.push_back(r);
    }
    const auto eval = binary_fullness_eval(low_k, 0.0, 400.0);
    report(9, eval.auc >= 0.99,
           fmt::format("simulated 0 vs 400 mL, k <= 3, pooled leave-one-k-out: AUC {:.4f}, accuracy {:.3f} "
                       "({} full / {} empty). Hardware and in-vivo figures are not reproducible without the "
                       "device and subject recordings; see README.",
                       eval.auc, eval.accuracy, eval.positives, eval.negatives));
}

} // namespace

int main() {
    try {
        criterion1();
        criterion2();
        criterion3();
        criterion7();
        criterion8();
        const auto t0 = Clock::now();
        const Acceptance a = default_scenario();
        std::cout << fmt::format("acceptance scenario: {} elements, {} nodes, {} channels (built in {:.1f} s)",
                                 a.scenario.mesh.element_count(), a.scenario.mesh.node_count(),
                                 a.scenario.plan.size(), seconds_since(t0))
                  << std::endl;
        criterion4and6(a);
        const auto ds = criterion5(a);
        criterion9(ds);
    } catch (const std::exception& e) {
        std::cout << "acceptance aborted: " << e.what() << std::endl;
        return 2;
    }
    std::cout << (failures ? fmt::format("{} criteria failed", failures) : std::string("all criteria passed"))
              << std::endl;
    return failures ? 1 : 0;
}
