#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tidecast/forecaster.hpp"

namespace tidecast {

std::vector<double> naive_forecast(std::span<const double> history, std::size_t horizon);
std::vector<double> seasonal_naive(std::span<const double> history, int period, std::size_t horizon);
std::vector<double> ses_forecast(std::span<const double> history, double alpha, std::size_t horizon);

// y_t = intercept + sum_i coefficients[i] * y_{t-1-i}, least squares.
//
// `differenced` models are fitted on first differences and integrated back.
// `normalized` models work in the z-scored space of whatever history they
// are handed, so one model can serve series of any level and scale.
struct LinearARModel {
    int order = 1;
    double intercept = 0.0;
    std::vector<double> coefficients;
    double residual_std = 0.0;
    bool differenced = false;
    bool normalized = false;
    bool ridge_used = false;  // the normal equations were singular

    nlohmann::json to_json() const;
    static LinearARModel from_json(const nlohmann::json& j);
};

inline constexpr double kRidgeLambda = 1e-6;

// Requires history.size() >= 2p + 1 (one more when differenced). The ridge
// fallback leaves the intercept unpenalized.
LinearARModel ar_fit(std::span<const double> history, int p, bool differenced = false);

// One model over many series, each contributing its own lagged rows. With
// `normalized`, every series is z-scored before its rows are formed.
LinearARModel ar_fit_pooled(std::span<const std::vector<double>> series, int p, bool normalized);

// Recursive multi-step forecast feeding predictions back as lags.
std::vector<double> ar_predict(const LinearARModel& model, std::span<const double> history, std::size_t horizon);

// Design-space transform applied before the AR recursion (differencing and
// normalization) and its inverse.
struct ArSpace {
    std::vector<double> series;  // model-space history
    double mean = 0.0;
    double scale = 1.0;
    double last_level = 0.0;  // for differenced models
};
ArSpace to_model_space(const LinearARModel& model, std::span<const double> history);
std::vector<double> from_model_space(const LinearARModel& model, const ArSpace& space, std::span<const double> path);
std::vector<double> ar_recurse(const LinearARModel& model, std::span<const double> lags, std::size_t horizon);

// 1.4826 * median absolute deviation, falling back to the standard
// deviation when the MAD vanishes.
double robust_scale(std::span<const double> history);

double confidence_from_residual(double residual_std, double scale);

// Residual-based confidence. The residual is the RMS one-step error of the
// model over the supplied history (model.residual_std when the history is
// too short); the scale is robust_scale of the history in model space.
double baseline_confidence(const LinearARModel& model, std::span<const double> history, std::size_t horizon);

// ---------------------------------------------------------------------------
// Forecaster wrappers

class NaiveForecaster final : public Forecaster {
public:
    std::string kind() const override { return "naive"; }
    std::vector<double> predict(std::span<const double> history, std::size_t horizon) const override;
    std::unique_ptr<Forecaster> clone() const override { return std::make_unique<NaiveForecaster>(*this); }
    nlohmann::json describe() const override { return {{"kind", kind()}}; }
};

class SeasonalNaiveForecaster final : public Forecaster {
public:
    // Period 0 takes the period of each series handed to predict_series.
    explicit SeasonalNaiveForecaster(int period) : period_(period) {}
    std::string kind() const override { return "seasonal_naive"; }
    std::vector<double> predict(std::span<const double> history, std::size_t horizon) const override;
    std::vector<double> predict_series(const TimeSeries& history, std::size_t horizon) const override;
    std::unique_ptr<Forecaster> clone() const override { return std::make_unique<SeasonalNaiveForecaster>(*this); }
    nlohmann::json describe() const override { return {{"kind", kind()}, {"period", period_}}; }
    int period() const { return period_; }

private:
    int period_;
};

class SesForecaster final : public Forecaster {
public:
    explicit SesForecaster(double alpha) : alpha_(alpha) {}
    std::string kind() const override { return "ses"; }
    std::vector<double> predict(std::span<const double> history, std::size_t horizon) const override;
    std::unique_ptr<Forecaster> clone() const override { return std::make_unique<SesForecaster>(*this); }
    nlohmann::json describe() const override { return {{"kind", kind()}, {"alpha", alpha_}}; }

private:
    double alpha_;
};

// Refits AR(p) on every history it is asked about (a local model). Order is
// reduced when the history is too short.
class LocalArForecaster final : public Forecaster {
public:
    explicit LocalArForecaster(int order, bool differenced = false) : order_(order), differenced_(differenced) {}
    std::string kind() const override { return "ar"; }
    std::vector<double> predict(std::span<const double> history, std::size_t horizon) const override;
    double confidence(std::span<const double> history, std::size_t horizon) const override;
    std::unique_ptr<Forecaster> clone() const override { return std::make_unique<LocalArForecaster>(*this); }
    nlohmann::json describe() const override {
        return {{"kind", kind()}, {"order", order_}, {"differenced", differenced_}};
    }

    LinearARModel fit(std::span<const double> history) const;

private:
    int order_;
    bool differenced_;
};

// A fixed, already fitted AR model.
class FittedArForecaster final : public Forecaster {
public:
    explicit FittedArForecaster(LinearARModel model) : model_(std::move(model)) {}
    std::string kind() const override { return "fitted_ar"; }
    std::vector<double> predict(std::span<const double> history, std::size_t horizon) const override {
        return ar_predict(model_, history, horizon);
    }
    double confidence(std::span<const double> history, std::size_t horizon) const override {
        return baseline_confidence(model_, history, horizon);
    }
    std::unique_ptr<Forecaster> clone() const override { return std::make_unique<FittedArForecaster>(*this); }
    nlohmann::json describe() const override { return {{"kind", kind()}, {"model", model_.to_json()}}; }
    const LinearARModel& model() const { return model_; }

private:
    LinearARModel model_;
};

}  // namespace tidecast
