#include "config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "padeit/channels.hpp"
#include "padeit/error.hpp"

namespace padeit::cli {

using nlohmann::json;

namespace {

/// Reads members of one JSON object and rejects keys nobody asked for.
class Section {
public:
    Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) throw ConfigError(fmt::format("{} must be an object", label()));
    }

    Section(const Section&) = delete;

    /// Call once every key has been read.
    void done() const {
        for (const auto& [key, value] : node_.items()) {
            if (!seen_.count(key)) throw ConfigError(fmt::format("unknown key '{}'", at(key)));
        }
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return node_.contains(key) && !node_.at(key).is_null();
    }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return node_.at(key);
    }

    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    template <class T>
    void get(const std::string& key, T& out) {
        if (!has(key)) return;
        out = convert<T>(node_.at(key), at(key));
    }

    template <class T>
    void get(const std::string& key, std::optional<T>& out) {
        seen_.insert(key);
        if (!node_.contains(key)) return;
        if (node_.at(key).is_null()) {
            out.reset();
            return;
        }
        out = convert<T>(node_.at(key), at(key));
    }

    template <class T>
    static T convert(const json& v, const std::string& where) {
        try {
            if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) throw ConfigError(fmt::format("{} must be a number", where));
            } else if constexpr (std::is_integral_v<T>) {
                if (!v.is_number_integer()) throw ConfigError(fmt::format("{} must be an integer", where));
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw ConfigError(fmt::format("{} must be a string", where));
            }
            return v.get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(fmt::format("{}: {}", where, e.what()));
        }
    }

private:
    std::string label() const { return path_.empty() ? "config" : path_; }

    const json& node_;
    std::string path_;
    std::set<std::string> seen_;
};

Vec3 read_vec3(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 3) throw ConfigError(fmt::format("{} must be an array of 3 numbers", where));
    Vec3 out;
    for (int i = 0; i < 3; ++i) out[i] = Section::convert<double>(v[static_cast<std::size_t>(i)], where);
    return out;
}

void get_vec3(Section& s, const std::string& key, Vec3& out) {
    if (s.has(key)) out = read_vec3(s.raw(key), s.at(key));
}

std::pair<double, double> read_range(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 2) throw ConfigError(fmt::format("{} must be [low, high]", where));
    return {Section::convert<double>(v[0], where), Section::convert<double>(v[1], where)};
}

std::string resolve(const std::string& path, const std::filesystem::path& base) {
    const std::filesystem::path p(path);
    if (p.is_absolute() || base.empty()) return p.lexically_normal().string();
    return (base / p).lexically_normal().string();
}

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}

void check_layout(const GridLayout& l, const std::string& where) {
    try {
        l.validate();
    } catch (const Error& e) {
        throw ConfigError(fmt::format("{}: {}", where, e.what()));
    }
}

} // namespace

ExperimentConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
    ExperimentConfig c;
    Section root(doc, "");
    require(root.has("version"), "config is missing 'version'");
    root.get("version", c.version);
    require(c.version == config_version,
            fmt::format("unsupported config version {} (expected {})", c.version, config_version));
    require(root.has("seed"), "config is missing 'seed'");
    root.get("seed", c.seed);
    root.get("threads", c.threads);
    require(c.threads >= 1, "threads must be >= 1");
    root.get("output", c.output);
    root.get("current", c.current);
    require(c.current > 0.0 && std::isfinite(c.current), "current must be positive");

    if (root.has("domain")) {
        Section d(root.raw("domain"), "domain");
        d.get("mesh_file", c.domain.mesh_file);
        if (c.domain.mesh_file) c.domain.mesh_file = resolve(*c.domain.mesh_file, base_dir);
        if (d.has("generator")) {
            Section g(d.raw("generator"), "domain.generator");
            auto& gen = c.domain.generator;
            g.get("type", gen.type);
            require(gen.type == "graded-cylinder" || gen.type == "cylinder" || gen.type == "disc",
                    fmt::format("unknown mesh generator '{}'", gen.type));
            g.get("radius", gen.radius);
            g.get("height", gen.height);
            g.get("target_elements", gen.target_elements);
            g.get("surface_spacing", gen.graded.surface_spacing);
            g.get("core_spacing", gen.graded.core_spacing);
            g.get("growth", gen.graded.growth);
            g.get("focus_z", gen.graded.focus_z);
            g.get("focus_halfwidth", gen.graded.focus_halfwidth);
            g.done();
        }
        d.get("background_conductivity", c.domain.background_conductivity);
        require(c.domain.background_conductivity > 0.0, "domain.background_conductivity must be positive");
        if (d.has("bladder")) {
            Section b(d.raw("bladder"), "domain.bladder");
            get_vec3(b, "center", c.domain.bladder.center);
            get_vec3(b, "aspect", c.domain.bladder.aspect);
            b.get("conductivity", c.domain.bladder.conductivity);
            b.done();
        }
        require((c.domain.bladder.aspect.array() > 0.0).all(), "domain.bladder.aspect must be positive");
        require(c.domain.bladder.conductivity > 0.0, "domain.bladder.conductivity must be positive");
        d.get("volume_ml", c.domain.volume_ml);
        d.done();
        require(c.domain.volume_ml >= 0.0, "domain.volume_ml must be >= 0");
    }

    if (root.has("layout")) {
        Section l(root.raw("layout"), "layout");
        l.get("rows", c.layout.rows);
        l.get("cols", c.layout.cols);
        l.get("spacing", c.layout.spacing);
        get_vec3(l, "origin", c.layout.origin);
        get_vec3(l, "orientation", c.layout.orientation);
        l.done();
    }
    check_layout(c.layout, "layout");

    if (root.has("channels")) {
        Section ch(root.raw("channels"), "channels");
        ch.get("strategy", c.channels);
        ch.get("diagonal", c.diagonal);
        ch.done();
    }
    require(c.channels == "default" || c.channels == "rectangle" || c.channels == "diagonal" || c.channels == "all",
            fmt::format("unknown channel strategy '{}'", c.channels));
    try {
        (void)diagonal_strategy(c.diagonal);
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }

    if (root.has("reconstruction")) {
        Section r(root.raw("reconstruction"), "reconstruction");
        r.get("lambda", c.reconstruction.lambda);
        r.get("p", c.reconstruction.p);
        r.done();
    }
    require(!c.reconstruction.lambda || *c.reconstruction.lambda > 0.0, "reconstruction.lambda must be positive");
    require(c.reconstruction.p >= 0.0 && c.reconstruction.p <= 1.0, "reconstruction.p must lie in [0, 1]");

    if (root.has("slice")) {
        Section s(root.raw("slice"), "slice");
        s.get("height", c.slice.height);
        s.get("nx", c.slice.nx);
        s.get("ny", c.slice.ny);
        s.done();
    }
    require(c.slice.nx >= 1 && c.slice.ny >= 1, "slice resolution must be at least 1x1");

    if (root.has("sweep_layout")) {
        Section s(root.raw("sweep_layout"), "sweep_layout");
        if (s.has("layouts")) {
            const json& arr = s.raw("layouts");
            require(arr.is_array() && !arr.empty(), "sweep_layout.layouts must be a non-empty array");
            c.sweep_layout.layouts.clear();
            for (std::size_t i = 0; i < arr.size(); ++i) {
                Section e(arr[i], fmt::format("sweep_layout.layouts[{}]", i));
                LayoutEntry entry;
                e.get("rows", entry.rows);
                e.get("cols", entry.cols);
                e.get("spacing", entry.spacing);
                e.done();
                c.sweep_layout.layouts.push_back(entry);
            }
        }
        s.get("volume_ml", c.sweep_layout.volume_ml);
        s.done();
    }
    for (std::size_t i = 0; i < c.sweep_layout.layouts.size(); ++i) {
        const auto& e = c.sweep_layout.layouts[i];
        check_layout({e.rows, e.cols, e.spacing, c.layout.origin, c.layout.orientation},
                     fmt::format("sweep_layout.layouts[{}]", i));
    }

    if (root.has("perturbation")) {
        Section p(root.raw("perturbation"), "perturbation");
        auto& pc = c.perturbation;
        p.get("volumes", pc.volumes);
        p.get("degrees", pc.degrees);
        p.get("trials", pc.trials);
        if (p.has("impedance_factor")) {
            const auto [lo, hi] = read_range(p.raw("impedance_factor"), p.at("impedance_factor"));
            pc.impedance_factor = {lo, hi};
        }
        if (p.has("displacement")) {
            const auto [lo, hi] = read_range(p.raw("displacement"), p.at("displacement"));
            pc.min_displacement = lo;
            pc.max_displacement = hi;
        }
        p.get("noise_sd", pc.noise_sd);
        p.done();
    }
    {
        const auto& pc = c.perturbation;
        require(!pc.volumes.empty(), "perturbation.volumes must not be empty");
        require(!pc.degrees.empty(), "perturbation.degrees must not be empty");
        require(pc.trials >= 1, "perturbation.trials must be >= 1");
        require(pc.noise_sd >= 0.0, "perturbation.noise_sd must be >= 0");
        for (int k : pc.degrees) {
            try {
                PerturbationSpec{k, pc.impedance_factor, pc.min_displacement, pc.max_displacement, 0}.validate(
                    static_cast<std::size_t>(c.layout.electrode_count()));
            } catch (const Error& e) {
                throw ConfigError(fmt::format("perturbation: {}", e.what()));
            }
        }
    }

    if (root.has("classify")) {
        Section s(root.raw("classify"), "classify");
        auto& cc = c.classify;
        s.get("dataset", cc.dataset);
        if (cc.dataset) cc.dataset = resolve(*cc.dataset, base_dir);
        s.get("l2", cc.classifier.l2);
        s.get("tolerance", cc.classifier.tolerance);
        s.get("max_iterations", cc.classifier.max_iterations);
        s.get("divisions", cc.divisions);
        s.get("v_low", cc.v_low);
        s.get("v_high", cc.v_high);
        s.get("binary_max_degree", cc.binary_max_degree);
        s.done();
    }
    require(c.classify.classifier.l2 >= 0.0, "classify.l2 must be >= 0");
    require(c.classify.classifier.max_iterations >= 0, "classify.max_iterations must be >= 0");
    require(c.classify.v_low < c.classify.v_high, "classify.v_low must be below classify.v_high");
    for (const auto& d : c.classify.divisions) require(d.size() >= 2, "every class division needs two classes");

    if (root.has("analyze")) {
        Section s(root.raw("analyze"), "analyze");
        auto& a = c.analyze;
        s.get("input", a.input);
        if (a.input) a.input = resolve(*a.input, base_dir);
        s.get("other", a.other);
        if (a.other) a.other = resolve(*a.other, base_dir);
        s.get("operation", a.operation);
        s.get("group_size", a.group_size);
        s.get("window_seconds", a.window_seconds);
        s.done();
    }
    root.done();
    require(c.analyze.operation == "baseline" || c.analyze.operation == "group" ||
                c.analyze.operation == "normalize" || c.analyze.operation == "compare",
            fmt::format("unknown analyze operation '{}'", c.analyze.operation));
    require(c.analyze.group_size >= 1, "analyze.group_size must be >= 1");
    require(c.analyze.window_seconds > 0.0, "analyze.window_seconds must be positive");
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path.string()));
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
    }
    return parse_config(doc, path.parent_path());
}

namespace {

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

template <class T>
json opt(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

} // namespace

json to_json(const ExperimentConfig& c) {
    const auto& g = c.domain.generator;
    json layouts = json::array();
    for (const auto& e : c.sweep_layout.layouts) {
        layouts.push_back({{"rows", e.rows}, {"cols", e.cols}, {"spacing", e.spacing}});
    }
    const auto& pc = c.perturbation;
    const auto& cc = c.classify;
    const auto& a = c.analyze;
    return {
        {"version", c.version},
        {"seed", c.seed},
        {"threads", c.threads},
        {"output", c.output},
        {"current", c.current},
        {"domain",
         {{"mesh_file", opt(c.domain.mesh_file)},
          {"generator",
           {{"type", g.type},
            {"radius", g.radius},
            {"height", g.height},
            {"target_elements", g.target_elements},
            {"surface_spacing", g.graded.surface_spacing},
            {"core_spacing", g.graded.core_spacing},
            {"growth", g.graded.growth},
            {"focus_z", g.graded.focus_z},
            {"focus_halfwidth", g.graded.focus_halfwidth}}},
          {"background_conductivity", c.domain.background_conductivity},
          {"bladder",
           {{"center", vec(c.domain.bladder.center)},
            {"aspect", vec(c.domain.bladder.aspect)},
            {"conductivity", c.domain.bladder.conductivity}}},
          {"volume_ml", c.domain.volume_ml}}},
        {"layout",
         {{"rows", c.layout.rows},
          {"cols", c.layout.cols},
          {"spacing", c.layout.spacing},
          {"origin", vec(c.layout.origin)},
          {"orientation", vec(c.layout.orientation)}}},
        {"channels", {{"strategy", c.channels}, {"diagonal", c.diagonal}}},
        {"reconstruction", {{"lambda", opt(c.reconstruction.lambda)}, {"p", c.reconstruction.p}}},
        {"slice", {{"height", opt(c.slice.height)}, {"nx", c.slice.nx}, {"ny", c.slice.ny}}},
        {"sweep_layout", {{"layouts", layouts}, {"volume_ml", opt(c.sweep_layout.volume_ml)}}},
        {"perturbation",
         {{"volumes", pc.volumes},
          {"degrees", pc.degrees},
          {"trials", pc.trials},
          {"impedance_factor", json::array({pc.impedance_factor.low, pc.impedance_factor.high})},
          {"displacement", json::array({pc.min_displacement, pc.max_displacement})},
          {"noise_sd", pc.noise_sd}}},
        {"classify",
         {{"dataset", opt(cc.dataset)},
          {"l2", cc.classifier.l2},
          {"tolerance", cc.classifier.tolerance},
          {"max_iterations", cc.classifier.max_iterations},
          {"divisions", cc.divisions},
          {"v_low", cc.v_low},
          {"v_high", cc.v_high},
          {"binary_max_degree", opt(cc.binary_max_degree)}}},
        {"analyze",
         {{"input", opt(a.input)},
          {"other", opt(a.other)},
          {"operation", a.operation},
          {"group_size", a.group_size},
          {"window_seconds", a.window_seconds}}},
    };
}

Mesh build_mesh(const DomainConfig& domain) {
    Mesh mesh = [&] {
        if (domain.mesh_file) return load_mesh(*domain.mesh_file);
        const auto& g = domain.generator;
        if (g.type == "disc") return generate_disc_mesh(g.radius, g.target_elements);
        if (g.type == "cylinder") return generate_cylinder_mesh(g.radius, g.height, g.target_elements);
        GradedCylinderSpec spec = g.graded;
        spec.radius = g.radius;
        spec.height = g.height;
        return generate_graded_cylinder_mesh(spec);
    }();
    return with_uniform_conductivity(mesh, domain.background_conductivity);
}

} // namespace padeit::cli
