#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tidecast/dromix.hpp"
#include "tidecast/forecaster.hpp"

namespace tidecast {

struct MapeResult {
    double value = 0.0;
    std::size_t used = 0;
    std::size_t skipped = 0;  // zero-truth points
};

// Mean |(y - f) / y| over nonzero truths. Throws UsageError when no truth is
// nonzero.
MapeResult mape_detailed(std::span<const double> truth, std::span<const double> forecast);
double mape(std::span<const double> truth, std::span<const double> forecast);

// sum |y - f| / sum |y|; throws UsageError on all-zero truth.
double wmape(std::span<const double> truth, std::span<const double> forecast);
// 1 - wmape.
double fa(std::span<const double> truth, std::span<const double> forecast);

struct NamedModel {
    std::string name;
    const Forecaster* model = nullptr;
};

struct BenchmarkOptions {
    std::size_t horizon = 12;
    std::size_t n_origins = 1;
    std::size_t step = 1;          // distance between successive origins
    std::size_t min_context = 16;  // observations required before the earliest origin
    bool with_confidence = false;
    bool clamp_one_minus_mape = false;
};

struct MetricRow {
    std::string model;
    std::string dataset;
    std::size_t series = 0;
    std::size_t windows = 0;
    double mape = 0.0;
    double one_minus_mape = 0.0;
    double wmape = 0.0;
    double fa = 0.0;
    std::optional<double> mean_nll;
    std::optional<double> mean_confidence;
    std::size_t mape_skipped_points = 0;
    std::size_t skipped_windows = 0;  // all-zero truth
};

struct MetricReport {
    std::vector<MetricRow> rows;
    std::vector<std::string> warnings;

    const MetricRow* find(const std::string& model, const std::string& dataset) const;
};

// Origins sit at T - horizon - j * step for j < n_origins; each window is
// forecast from the full prefix before its origin. Metrics are averaged over
// windows, then series, then datasets (FA is 1 - the aggregated WMAPE).
// Series that are too short are skipped with a warning.
MetricReport rolling_benchmark(std::span<const NamedModel> models, const DatasetMap& datasets,
                               const BenchmarkOptions& options);

struct SkillRow {
    std::string skill;
    double fa = 0.0;
    std::size_t windows = 0;
};

struct SkillOptions {
    std::size_t horizon = 12;
    std::size_t n_origins = 4;
};

// Seven rows, one per probe skill, in skill_names() order.
std::vector<SkillRow> skill_report(const Forecaster& model, std::uint64_t seed, const SkillOptions& options = {});

std::string report_csv(const MetricReport& report);
nlohmann::json report_json(const MetricReport& report);
std::string skill_csv(const std::vector<SkillRow>& rows);

// Fixed-precision decimal used by every text report.
std::string format_number(double v);

}  // namespace tidecast
