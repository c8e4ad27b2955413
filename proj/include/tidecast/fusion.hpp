#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tidecast/baselines.hpp"
#include "tidecast/dromix.hpp"
#include "tidecast/eval.hpp"
#include "tidecast/forecaster.hpp"

namespace tidecast {

// ---------------------------------------------------------------------------
// Model pool

// Builds a forecaster from a member description such as
// {"kind": "seasonal_naive", "period": 12}. Relative model paths are resolved
// against base_dir.
std::unique_ptr<Forecaster> make_forecaster(const nlohmann::json& desc, const std::filesystem::path& base_dir = {});

class ModelPool {
public:
    struct Member {
        std::string name;
        std::shared_ptr<const Forecaster> model;
        nlohmann::json meta;
    };

    void add(std::string name, std::shared_ptr<const Forecaster> model, nlohmann::json meta = nlohmann::json::object());

    std::size_t size() const { return members_.size(); }
    const Member& operator[](std::size_t i) const { return members_.at(i); }
    const std::vector<Member>& members() const { return members_; }
    std::vector<std::string> names() const;
    std::vector<NamedModel> named() const;

    // {"members": [{"name": ..., "kind": ..., ...}, ...]}
    static ModelPool from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
    static ModelPool load(const std::filesystem::path& path);
    nlohmann::json to_json() const;

    // Point forecasts of every member, in member order.
    std::vector<std::vector<double>> forecasts(const TimeSeries& history, std::size_t horizon) const;

private:
    std::vector<Member> members_;
};

struct ProfileRow {
    std::string member;
    std::string dataset;
    double fa = 0.0;
    double wmape = 0.0;
    double mape = 0.0;
    double mean_confidence = 0.0;
};

struct ModelProfile {
    std::vector<ProfileRow> rows;
    std::vector<std::string> warnings;

    // Member names sorted by descending FA on the dataset.
    std::vector<std::string> ranking(const std::string& dataset) const;
    nlohmann::json to_json() const;
};

ModelProfile profile(const ModelPool& pool, const DatasetMap& datasets, std::size_t horizon, std::size_t n_origins = 4);

// ---------------------------------------------------------------------------
// Simple combiners

std::vector<double> fuse_average(std::span<const std::vector<double>> forecasts);

struct LinearFusion {
    std::vector<double> weights;
    double intercept = 0.0;
    bool ridge_used = false;

    std::vector<double> apply(std::span<const std::vector<double>> forecasts) const;
    nlohmann::json to_json() const;
    static LinearFusion from_json(const nlohmann::json& j);
};

// rows[i] holds the K member forecasts for target truth[i]. Requires at least
// K + 1 rows.
LinearFusion fit_linear_fusion(std::span<const std::vector<double>> rows, std::span<const double> truth);

// ---------------------------------------------------------------------------
// Router

using Embedder = std::function<std::vector<double>(const TimeSeries&)>;

inline constexpr std::size_t kStatFeatures = 6;

// Scale-free summary of the most recent (at most 256) points: mean and
// standard deviation relative to mean |x|, lag-1 autocorrelation, relative
// linear slope over the window, seasonal strength and normalized spectral
// entropy.
std::vector<double> statistical_features(const TimeSeries& series);
Embedder statistical_embedder();

struct RouterParams {
    std::size_t in_dim = 0;
    std::size_t hidden = 32;
    std::size_t members = 0;
    std::vector<double> feature_mean, feature_scale;
    std::vector<double> w1, b1, w2, b2;  // hidden x in, hidden, members x hidden, members

    // All weights zero: uniform output for every input.
    static RouterParams zeros(std::size_t in_dim, std::size_t hidden, std::size_t members);

    nlohmann::json to_json() const;
    static RouterParams from_json(const nlohmann::json& j);
};

// Softmax weights over the members.
std::vector<double> router_weights(const RouterParams& router, std::span<const double> features);

enum class RouterMode { best_member_ce, end_to_end };
RouterMode parse_router_mode(std::string_view text);
std::string_view to_string(RouterMode mode);

struct RoutingExample {
    std::vector<double> features;
    std::vector<std::vector<double>> forecasts;  // members x horizon
    std::vector<double> truth;
};

// One example per rolling window of every series long enough to hold
// min_context + horizon + (n_origins - 1) points.
std::vector<RoutingExample> routing_examples(const ModelPool& pool, const Embedder& embed, const DatasetMap& datasets,
                                             std::size_t horizon, std::size_t n_origins, std::size_t min_context = 16);

struct RouterTrainOptions {
    RouterMode mode = RouterMode::best_member_ce;
    std::size_t hidden = 32;
    std::size_t epochs = 400;
    double learning_rate = 0.01;
};

// best_member_ce: cross-entropy against the member with the lowest absolute
// error on each example. end_to_end: mean squared error of the weighted
// forecast, each example scaled by its mean |truth|.
RouterParams train_router(std::span<const RoutingExample> examples, const RouterTrainOptions& options,
                          std::uint64_t seed);

// Training objective and its gradient with respect to the router arrays, in
// the order w1, b1, w2, b2 concatenated.
double router_loss(const RouterParams& router, std::span<const RoutingExample> examples, RouterMode mode,
                   std::vector<double>* grad = nullptr);

struct RoutedForecast {
    std::vector<double> forecast;
    std::vector<double> weights;
};

RoutedForecast route_fuse(const RouterParams& router, const Embedder& embed, const TimeSeries& series,
                          const ModelPool& pool, std::size_t horizon);

// ---------------------------------------------------------------------------
// Large/small coordination

struct CoordinationConfig {
    double tau1 = 0.6;
    std::optional<double> tau2;  // defaults to tau1
    double lambda = 1.0;
    std::size_t steps = 300;
    double learning_rate = 0.01;

    double large_threshold() const { return tau2.value_or(tau1); }
    void validate() const;
    nlohmann::json to_json() const;
};

struct CoordinationResult {
    LinearARModel s2;
    std::size_t easy = 0;
    std::size_t hard = 0;
    std::size_t challenging = 0;
    std::vector<double> losses;
    bool no_challenging = false;
};

// s1 must not be differenced. The distillation loss is measured in s1's
// model space (z-scored per history when s1 is normalized).
CoordinationResult coordinate_train(const LinearARModel& s1, const Forecaster& large,
                                    std::span<const TimeSeries> histories, std::size_t horizon,
                                    const CoordinationConfig& cfg, std::uint64_t seed);

enum class Route { s1, s2, large };
std::string_view to_string(Route r);

struct CascadeResult {
    std::vector<double> forecast;
    Route route = Route::s1;
    double confidence_s1 = 0.0;
    double confidence_s2 = 0.0;
};

CascadeResult coordinate_infer(const LinearARModel& s1, const LinearARModel& s2, const Forecaster& large,
                               const TimeSeries& series, std::size_t horizon, const CoordinationConfig& cfg);

// Forecast of an AR model in its own model space together with the
// derivative of every step with respect to (intercept, coefficients).
struct ArPathJacobian {
    std::vector<double> path;
    std::vector<std::vector<double>> jacobian;  // horizon x (order + 1)
};
ArPathJacobian ar_path_jacobian(const LinearARModel& model, std::span<const double> lags, std::size_t horizon);

// ---------------------------------------------------------------------------
// Fused forecasters

enum class FusionMode { average, linear, router };
FusionMode parse_fusion_mode(std::string_view text);
std::string_view to_string(FusionMode mode);

// Combines the pool members with one of the fusion rules. Value-only calls
// treat the history as a series of `freq` starting 2020-01-01.
class FusedForecaster final : public Forecaster {
public:
    FusedForecaster(std::shared_ptr<const ModelPool> pool, FusionMode mode, Frequency freq = Frequency::of(FreqClass::day));

    void set_linear(LinearFusion linear);
    void set_router(RouterParams router, RouterMode trained_with);

    FusionMode mode() const { return mode_; }
    const ModelPool& pool() const { return *pool_; }
    const std::optional<RouterParams>& router() const { return router_; }
    const std::optional<LinearFusion>& linear() const { return linear_; }

    std::string kind() const override { return "fused"; }
    std::vector<double> predict(std::span<const double> history, std::size_t horizon) const override;
    std::vector<double> predict_series(const TimeSeries& history, std::size_t horizon) const override;
    std::unique_ptr<Forecaster> clone() const override { return std::make_unique<FusedForecaster>(*this); }
    nlohmann::json describe() const override;

    // Member weights used for this history (uniform for average; the linear
    // coefficients for linear).
    std::vector<double> weights(const TimeSeries& history) const;

    // {"mode", "pool", "linear" | "router", "embedder"}
    nlohmann::json to_json() const;
    static FusedForecaster from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
    static FusedForecaster load(const std::filesystem::path& path);

private:
    std::shared_ptr<const ModelPool> pool_;
    FusionMode mode_;
    Frequency freq_;
    std::optional<LinearFusion> linear_;
    std::optional<RouterParams> router_;
    RouterMode router_mode_ = RouterMode::best_member_ce;
    Embedder embed_ = statistical_embedder();
};

// Linear fusion fitted on every (window, step) of the routing examples.
LinearFusion fit_linear_fusion(std::span<const RoutingExample> examples);

// Cascade s1 -> s2 -> large as a Forecaster.
class CascadeForecaster final : public Forecaster {
public:
    CascadeForecaster(LinearARModel s1, LinearARModel s2, std::shared_ptr<const Forecaster> large,
                      CoordinationConfig cfg, Frequency freq = Frequency::of(FreqClass::day))
        : s1_(std::move(s1)), s2_(std::move(s2)), large_(std::move(large)), cfg_(cfg), freq_(freq) {}

    std::string kind() const override { return "cascade"; }
    std::vector<double> predict(std::span<const double> history, std::size_t horizon) const override;
    std::vector<double> predict_series(const TimeSeries& history, std::size_t horizon) const override;
    std::unique_ptr<Forecaster> clone() const override { return std::make_unique<CascadeForecaster>(*this); }
    nlohmann::json describe() const override;

private:
    LinearARModel s1_, s2_;
    std::shared_ptr<const Forecaster> large_;
    CoordinationConfig cfg_;
    Frequency freq_;
};

}  // namespace tidecast
