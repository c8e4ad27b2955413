#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tidecast/fusion.hpp"
#include "tidecast/simulate.hpp"
#include "tidecast/tsfm.hpp"

namespace tidecast {

struct SimulatedDataset {
    std::string name;
    int count = 4;
    SyntheticSpec spec;
};

struct MbbSettings {
    int n_variants = 1;
    std::size_t block_len = 0;  // 0: twice the period
};

struct MixupSettings {
    int m = 2;
    double alpha = 1.0;
    int n_variants = 2;
};

struct DbaSettings {
    int k = 2;
    int per_cluster = 1;
    int iterations = 10;
};

struct AugmentSettings {
    std::optional<MbbSettings> mbb;
    std::optional<MixupSettings> mixup;
    std::optional<DbaSettings> dba;
};

struct FusionSettings {
    std::vector<nlohmann::json> members;  // pool member descriptions; the trained model joins as "tsfm"
    FusionMode mode = FusionMode::router;
    RouterTrainOptions router;
    std::size_t n_origins = 2;
};

struct CoordinationSettings {
    CoordinationConfig config;
    int s1_order = 0;  // 0: the largest dataset period
};

struct EvaluationSettings {
    std::size_t horizon = 12;
    std::size_t n_origins = 2;
    bool skills = false;
};

struct PipelineConfig {
    std::uint64_t seed = 0;
    std::vector<std::filesystem::path> data_paths;
    std::vector<SimulatedDataset> simulate;
    AugmentSettings augment;
    tsfm::ModelConfig model;
    tsfm::TrainOptions train;
    FusionSettings fusion;
    CoordinationSettings coordination;
    EvaluationSettings evaluation;

    // Unknown keys are rejected with UsageError.
    static PipelineConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    void validate() const;

    // Three simulated datasets with the desk-scale model.
    static PipelineConfig desk_default();
};

PipelineConfig load_pipeline_config(const std::filesystem::path& path);

struct InventoryRow {
    std::string provenance;  // real-world, simulation & augmentation, mixup
    std::size_t datasets = 0;
    std::size_t entries = 0;
    std::size_t points = 0;
};

std::string inventory_csv(const std::vector<InventoryRow>& rows);

struct PipelineResult {
    std::filesystem::path run_dir;
    std::vector<std::filesystem::path> artifacts;
    std::vector<InventoryRow> inventory;
    MetricReport report;
};

// Writes into run_dir: config.resolved.json, inventory.csv, weights.csv,
// model.json, pool.json, profile.json, fusion.json, coordination.json,
// forecasts.json, report.csv, report.json and run.log. A failing stage is
// reported with its name and the artifacts already written.
PipelineResult run_pipeline(const PipelineConfig& config, const std::filesystem::path& run_dir);

// Writes text with '\n' line endings, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace tidecast
