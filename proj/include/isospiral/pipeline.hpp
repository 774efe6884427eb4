#pragma once

#include "isospiral/energy.hpp"
#include "isospiral/field_init.hpp"
#include "isospiral/metrics.hpp"
#include "isospiral/optimizer.hpp"
#include "isospiral/slitmap.hpp"
#include "isospiral/toolpath.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace isospiral {

enum class InitKind { slitmap, raw };

struct PipelineConfig {
    std::string mesh;  // file path, or "builtin:<name>" for a bundled fixture
    double tool_radius = 10.0;
    double h_set = 0.2;
    double alpha = 10.0;
    double C = 0.9;
    DomainMode mode = DomainMode::automatic;
    int anchor_face = -1;  // overrides the anchor search
    int anchor_loop = -1;
    int theta_seeds = 8;
    InitKind init = InitKind::slitmap;
    int max_iterations = 2000;
    double tolerance = 1e-7;
    int patience = 5;
    int max_halvings = 10;
    double sample_density = 1.0;  // coverage / scallop samples per mm^2
    double feed = 1000.0;         // mm/min
    std::string output = "out";
};

// Sets one key from a config file line or a command-line flag.
void apply_setting(PipelineConfig& config, const std::string& key, const std::string& value);

// key = value lines; '#' starts a comment.
void read_config_file(PipelineConfig& config, const std::filesystem::path& file);

void validate(const PipelineConfig& config);

// Canonical text of every setting that affects results (the output directory is excluded).
[[nodiscard]] std::string canonical_config(const PipelineConfig& config);
[[nodiscard]] std::string config_hash(const PipelineConfig& config);

[[nodiscard]] TriMesh load_pipeline_mesh(const std::string& source);

struct PlanResult {
    PipelineConfig config;
    std::string hash;
    TriMesh mesh;
    SlitDomain slit{};    // S^S metadata
    SlitDomain domain{};  // S^H metadata after optimization
    SlitQuality quality{};
    std::optional<ThetaResult> theta{};
    RadialProfile profile{};
    std::vector<Vec2> SH_init{};  // S^H before optimization
    std::vector<double> T_init{}, T_opt{};
    OptimizerResult optimizer{};
    double delta_T = 0.0;
    Toolpath path{};
    nlohmann::ordered_json metrics{};
};

// Stages after the anchor is known; lets callers reuse one anchor search across variants.
[[nodiscard]] Anchor choose_anchor(TriMesh& mesh, const PipelineConfig& config, std::optional<ThetaResult>& theta);
[[nodiscard]] PlanResult run_plan(const PipelineConfig& config, const std::optional<Anchor>& anchor = std::nullopt);

// Evaluation of any toolpath on a surface, with optional energy-model terms.
[[nodiscard]] nlohmann::ordered_json evaluate_path(const TriMesh& mesh, const Toolpath& path, const CutterSpec& cutter, double h_set,
                                                   double sample_density, double feed);

[[nodiscard]] nlohmann::ordered_json energy_json(const EnergyReport& report);

// Writes every artifact into config.output; the manifest alone carries timestamps.
void write_plan_artifacts(const PlanResult& plan);

struct VariantRow {
    std::string label;
    bool ok = false;
    std::string error;
    nlohmann::ordered_json values;
};

// Variants are comma-separated key=value overrides, e.g. "alpha=1" or "init=raw,alpha=10".
[[nodiscard]] std::vector<VariantRow> run_compare(const PipelineConfig& base, const std::vector<std::string>& variants);
[[nodiscard]] nlohmann::ordered_json compare_json(const std::vector<VariantRow>& rows);

// Numeric artifacts use this for deterministic text.
[[nodiscard]] std::string dump_json(const nlohmann::ordered_json& j);

}  // namespace isospiral
