#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tidecast/baselines.hpp"
#include "tidecast/core_data.hpp"

namespace tidecast {

using DatasetMap = std::map<std::string, std::vector<TimeSeries>>;
using LossMap = std::map<std::string, double>;

DatasetMap to_dataset_map(const std::vector<Dataset>& datasets);

struct GroupWeights {
    std::map<std::string, double> weights;
    double eta = 0.1;
    double smoothing = 0.1;

    static GroupWeights uniform(const std::vector<std::string>& keys, double eta = 0.1, double smoothing = 0.1);

    // Throws NumericError unless every weight is >= 0 and they sum to 1.
    void check() const;

    nlohmann::json to_json() const;
};

enum class ReferenceModel { naive, seasonal_naive, ar };
enum class ReferenceLoss { squared_error, gaussian_nll };

std::string_view to_string(ReferenceModel kind);
ReferenceModel parse_reference_model(std::string_view text);

struct ReferenceOptions {
    ReferenceModel kind = ReferenceModel::ar;
    int order = 0;  // 0: the series period
    ReferenceLoss loss = ReferenceLoss::squared_error;
    double holdout_fraction = 0.2;
    // Score in the space z-scored by each series' training-part statistics.
    bool normalized = false;
};

struct ReferenceResult {
    double loss = 0.0;
    ReferenceModel used = ReferenceModel::ar;
    bool fell_back = false;  // singular fit replaced by the naive baseline
    std::size_t points = 0;
};

// Held-out one-step loss of a baseline fitted on the leading part of every
// series and scored on its trailing `holdout_fraction`.
ReferenceResult fit_reference(std::span<const TimeSeries> dataset, const ReferenceOptions& options = {});

// max(current - reference, 0) per dataset; the key sets must match.
LossMap excess_loss(const LossMap& current, const LossMap& reference);

// Exponentiated-gradient step followed by mixing with the uniform
// distribution.
GroupWeights update_weights(const GroupWeights& w, const LossMap& excess);

struct BatchItem {
    std::string dataset;
    TimeSeries window;
};

// Datasets are drawn categorically by weight; windows uniformly among all
// length-`window_len` windows of the chosen dataset (whole series when
// window_len is 0). Datasets without any window are never selected.
std::vector<BatchItem> sample_batch(const DatasetMap& datasets, const GroupWeights& w, std::size_t batch_size,
                                    std::size_t window_len, std::uint64_t seed);

// Stand-alone weighting run with a pooled AR learner trained by SGD on
// batches drawn by the current weights.
struct DroOptions {
    std::size_t steps = 100;
    std::size_t batch_size = 32;
    double learning_rate = 0.05;
    double eta = 0.1;
    double smoothing = 0.1;
    int order = 0;  // 0: smallest period across the datasets
    double holdout_fraction = 0.2;
    bool loss_multiplier = false;  // weights scale per-sample losses instead of sampling
};

struct DroRun {
    LossMap reference;
    std::vector<LossMap> current;                          // per step
    std::vector<std::map<std::string, double>> trajectory;  // weights, starting with the initial ones
    GroupWeights final_weights;
    LinearARModel learner;

    nlohmann::json to_json() const;
};

DroRun run_dro(const DatasetMap& datasets, const DroOptions& options, std::uint64_t seed);

}  // namespace tidecast
