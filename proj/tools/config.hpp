#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "padeit/analysis.hpp"
#include "padeit/electrodes.hpp"
#include "padeit/geometry.hpp"
#include "padeit/inverse.hpp"
#include "padeit/perturb.hpp"

namespace padeit::cli {

inline constexpr int config_version = 1;

struct MeshGenerator {
    std::string type = "graded-cylinder"; ///< graded-cylinder | cylinder | disc
    double radius = 150.0;
    double height = 240.0;
    int target_elements = 20000; ///< cylinder and disc only
    GradedCylinderSpec graded;
};

struct DomainConfig {
    std::optional<std::string> mesh_file; ///< overrides the generator
    MeshGenerator generator;
    double background_conductivity = 0.2;
    BladderModel bladder{Vec3(30.0, -110.0, 60.0), Vec3(1.0, 0.8, 0.6), 1.75};
    double volume_ml = 100.0;
};

struct SliceConfig {
    std::optional<double> height; ///< default: bladder centre z
    int nx = 96;
    int ny = 96;
};

struct LayoutEntry {
    int rows = 3;
    int cols = 3;
    double spacing = 60.0;
};

struct SweepLayoutConfig {
    std::vector<LayoutEntry> layouts{{2, 4, 60.0}, {3, 3, 60.0}, {3, 4, 60.0}, {4, 4, 60.0},
                                     {3, 3, 30.0}, {3, 3, 45.0}};
    std::optional<double> volume_ml; ///< default: domain.volume_ml
};

struct PerturbationConfig {
    std::vector<double> volumes{0.0, 100.0, 200.0, 300.0, 400.0};
    std::vector<int> degrees{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    int trials = 16;
    FactorRange impedance_factor{2.0, 5.0};
    double min_displacement = 5.0;
    double max_displacement = 20.0;
    double noise_sd = 0.0;
};

struct ClassifyConfig {
    std::optional<std::string> dataset;
    ClassifierOptions classifier;
    std::vector<std::vector<double>> divisions{{0.0, 200.0, 400.0}, {0.0, 100.0, 200.0, 300.0, 400.0}};
    double v_low = 0.0;
    double v_high = 400.0;
    std::optional<int> binary_max_degree = 3; ///< rows with k above this are ignored by the binary study
};

struct AnalyzeConfig {
    std::optional<std::string> input;
    std::optional<std::string> other; ///< second series for compare
    std::string operation = "baseline";  ///< baseline | group | normalize | compare
    int group_size = 3;
    double window_seconds = 2.0;
};

struct ExperimentConfig {
    int version = config_version;
    std::uint64_t seed = 0;
    int threads = 1;
    std::string output = "out";
    double current = 1e-3;
    DomainConfig domain;
    GridLayout layout{3, 3, 60.0, Vec3(0.0, -150.0, 120.0), Vec3::UnitX()};
    std::string channels = "default";
    std::string diagonal = "squares";
    ReconstructionOptions reconstruction;
    SliceConfig slice;
    SweepLayoutConfig sweep_layout;
    PerturbationConfig perturbation;
    ClassifyConfig classify;
    AnalyzeConfig analyze;
};

/// Parses a config document. Unknown keys, a missing seed, a wrong version or
/// unknown strategy names raise ConfigError. Relative paths are resolved
/// against `base_dir`.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Fully resolved document; parse_config(to_json(c)) == c.
nlohmann::json to_json(const ExperimentConfig& config);

/// Builds the background mesh described by the domain section.
Mesh build_mesh(const DomainConfig& domain);

} // namespace padeit::cli
