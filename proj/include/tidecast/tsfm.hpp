#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tidecast/core_data.hpp"
#include "tidecast/dromix.hpp"
#include "tidecast/forecaster.hpp"

namespace tidecast::tsfm {

inline constexpr int kFormatVersion = 1;
inline constexpr std::size_t kCalendarDims = 8;
inline constexpr std::size_t kFreqClasses = 6;

struct ModelConfig {
    int n_layers = 2;
    int d_model = 64;
    int n_heads = 4;
    int n_experts = 4;
    int top_k = 2;
    int d_ff = 128;
    std::vector<int> patch_lengths{8, 16};
    int context_patches = 8;
    bool positional_embedding = false;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;
    // Patch length per frequency class; classes absent here use the default
    // rule (minute and hour take the largest length, the rest the smallest).
    std::map<FreqClass, int> patch_for_freq;

    void validate() const;
    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
};

int patch_length_for(const ModelConfig& config, const Frequency& freq);

struct Array {
    std::vector<std::size_t> shape;
    std::vector<double> values;

    friend bool operator==(const Array&, const Array&) = default;
};
using Arrays = std::map<std::string, Array>;

struct Params {
    ModelConfig config;
    Arrays arrays;
};

// Deterministic initialization per seed.
Params init_params(const ModelConfig& config, std::uint64_t seed);

// Checks every expected array exists with the right shape and finite values.
// Throws DataError naming the first offending array.
void validate(const Params& params);

// Zero arrays with the same names and shapes.
Arrays zeros_like(const Arrays& arrays);

struct PatchToken {
    std::vector<double> values;  // normalized; 0 where padded
    std::vector<std::uint8_t> mask;  // 1 where observed
    CalendarFeatures calendar;   // of the patch's final position
    int patch_len = 0;

    bool observed() const;
};

struct Tokenized {
    std::vector<PatchToken> tokens;
    NormStats stats;
};

// Normalizes the most recent patch_len * context_patches points with their
// own statistics and cuts them into exactly context_patches tokens,
// left-padding the oldest one(s).
Tokenized tokenize(const TimeSeries& series, int patch_len, int context_patches);
// Same, for the prefix series[0, end).
Tokenized tokenize_prefix(const TimeSeries& series, std::size_t end, int patch_len, int context_patches);

std::array<double, kCalendarDims> encode_calendar(const CalendarFeatures& c);

struct ForwardOutput {
    std::vector<std::vector<StudentT>> dist;  // per token, per position of the next patch
    std::vector<std::vector<double>> hidden;  // final normalized hidden state per token
};

ForwardOutput forward(const Params& params, std::span<const PatchToken> tokens, const Frequency& freq);

// Negative log-density of the location-scale Student-T.
double student_t_nll(double y, const StudentT& d);

struct StudentTGrad {
    double nu = 0.0;
    double mu = 0.0;
    double sigma = 0.0;
};
StudentTGrad student_t_nll_grad(double y, const StudentT& d);

// Mean NLL over positions whose mask is set.
double nll_loss(std::span<const StudentT> pred, std::span<const double> target, std::span<const std::uint8_t> mask);

// One teacher-forced sequence: token i is scored on the values of token i + 1,
// the last token on the patch that follows the context.
struct TrainSample {
    std::vector<PatchToken> tokens;
    std::vector<double> targets;        // tokens.size() * patch_len, normalized
    std::vector<std::uint8_t> target_mask;
    Frequency freq;
    double weight = 1.0;
    std::string dataset;
};

// Uses series[0, end) with the final patch_len points as the last target.
// Requires end >= patch_len + 1.
TrainSample make_sample(const TimeSeries& series, std::size_t end, int patch_len, int context_patches);

// Weighted mean NLL over all unmasked targets of the batch.
double batch_loss(const Params& params, std::span<const TrainSample> batch);

// Same loss; gradients are accumulated into `grad` (which must match the
// parameter shapes and is zeroed first).
double batch_loss_grad(const Params& params, std::span<const TrainSample> batch, Arrays& grad);

struct TrainOptions {
    std::size_t steps = 200;
    std::size_t batch_size = 8;
    // Every step uses every window of every series (for small overfit runs).
    bool full_batch = false;
    bool dro = false;
    bool loss_multiplier = false;  // DRO weights scale sample losses instead of sampling
    std::size_t dro_every = 10;
    double eta = 0.1;
    double smoothing = 0.1;
    std::size_t eval_series_per_dataset = 4;
};

struct TrainResult {
    Params params;
    std::vector<double> losses;  // batch loss before each update
    std::vector<std::map<std::string, double>> weight_trajectory;
    LossMap reference;
    bool diverged = false;
    std::size_t steps_completed = 0;
};

// Adam on the teacher-forced NLL. Training stops at the first non-finite
// loss or gradient and returns the parameters from before that step.
TrainResult train(const ModelConfig& config, const DatasetMap& datasets, const TrainOptions& options,
                  std::uint64_t seed);
TrainResult train(Params init, const DatasetMap& datasets, const TrainOptions& options, std::uint64_t seed);

struct ForecastOutput {
    std::vector<StudentT> dist;  // de-normalized
    std::vector<double> point;   // = mu
    double confidence = 0.0;
    std::size_t forward_passes = 0;
};

ForecastOutput forecast(const Params& params, const TimeSeries& series, std::size_t horizon);

std::vector<double> embed_series(const Params& params, const TimeSeries& series);

nlohmann::json to_json(const Params& params);
Params params_from_json(const nlohmann::json& j);
void save(const Params& params, const std::filesystem::path& path);
Params load(const std::filesystem::path& path);

class TsfmForecaster final : public Forecaster {
public:
    // `freq` is used when only raw values are supplied.
    TsfmForecaster(std::shared_ptr<const Params> params, Frequency freq, std::string path = {})
        : params_(std::move(params)), freq_(freq), path_(std::move(path)) {}

    std::string kind() const override { return "tsfm"; }
    std::vector<double> predict(std::span<const double> history, std::size_t horizon) const override;
    double confidence(std::span<const double> history, std::size_t horizon) const override;
    std::vector<double> predict_series(const TimeSeries& history, std::size_t horizon) const override;
    double confidence_series(const TimeSeries& history, std::size_t horizon) const override;
    std::optional<std::vector<StudentT>> predict_distribution(std::span<const double> history,
                                                              std::size_t horizon) const override;
    std::unique_ptr<Forecaster> clone() const override { return std::make_unique<TsfmForecaster>(*this); }
    nlohmann::json describe() const override;

    const Params& params() const { return *params_; }

private:
    TimeSeries wrap(std::span<const double> history) const;

    std::shared_ptr<const Params> params_;
    Frequency freq_;
    std::string path_;
};

}  // namespace tidecast::tsfm
