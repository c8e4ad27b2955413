#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "common.hpp"
#include "tidecast/baselines.hpp"
#include "tidecast/eval.hpp"

namespace fixtures {

using namespace tidecast;

// Forecasts history.back() + offset for every step.
class OffsetForecaster final : public Forecaster {
public:
    explicit OffsetForecaster(double offset) : offset_(offset) {}
    std::string kind() const override { return "offset"; }
    std::vector<double> predict(std::span<const double> history, std::size_t horizon) const override {
        return std::vector<double>(horizon, history.back() + offset_);
    }
    std::unique_ptr<Forecaster> clone() const override { return std::make_unique<OffsetForecaster>(*this); }
    nlohmann::json describe() const override { return {{"kind", kind()}}; }

private:
    double offset_;
};

// Continues a line through the last two points.
class DriftForecaster final : public Forecaster {
public:
    std::string kind() const override { return "drift"; }
    std::vector<double> predict(std::span<const double> history, std::size_t horizon) const override {
        const std::size_t n = history.size();
        const double step = n > 1 ? history[n - 1] - history[n - 2] : 0.0;
        std::vector<double> out(horizon);
        for (std::size_t h = 0; h < horizon; ++h) out[h] = history[n - 1] + step * static_cast<double>(h + 1);
        return out;
    }
    std::unique_ptr<Forecaster> clone() const override { return std::make_unique<DriftForecaster>(*this); }
    nlohmann::json describe() const override { return {{"kind", kind()}}; }
};

inline std::vector<TimeSeries> regime_series(std::uint64_t seed, std::size_t count) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<TimeSeries> out;
    for (std::size_t i = 0; i < count; ++i) {
        const double level = 20.0 + 80.0 * u(rng);
        if (i % 2 == 0) {
            const double slope = (0.5 + u(rng)) * level / 100.0;
            out.push_back(testing::make_series(testing::trend_season(96, level, slope, 0.0, 12), 12, "t" + std::to_string(i)));
        } else {
            out.push_back(testing::make_series(testing::trend_season(96, level, 0.0, level / 4.0, 12, 6.28 * u(rng)), 12,
                                               "s" + std::to_string(i)));
        }
    }
    return out;
}

inline double pooled_fa(const std::vector<std::vector<double>>& truth, const std::vector<std::vector<double>>& pred) {
    std::vector<double> t, p;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        t.insert(t.end(), truth[i].begin(), truth[i].end());
        p.insert(p.end(), pred[i].begin(), pred[i].end());
    }
    return fa(t, p);
}

struct CoordinationSetup {
    LinearARModel s1;
    std::vector<TimeSeries> histories;
    std::vector<std::vector<double>> futures;
};

// Smooth AR data the small model handles, and seasonal series it does not.
inline CoordinationSetup coordination_setup() {
    CoordinationSetup c;
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 0.05);
    std::vector<double> ar_data{5.0};
    for (int t = 1; t < 300; ++t) ar_data.push_back(5.0 + 0.9 * (ar_data.back() - 5.0) + g(rng));
    c.s1 = ar_fit(ar_data, 3);
    for (int i = 0; i < 6; ++i) {
        std::vector<double> smooth(60);
        const double shift = 27.0 + 9.0 * (i % 3);
        for (std::size_t t = 0; t < 60; ++t) smooth[t] = 5.0 + 0.8 * std::sin(0.05 * (static_cast<double>(t) + shift));
        c.histories.push_back(testing::make_series(std::vector<double>(smooth.begin(), smooth.begin() + 48), 12));
        c.futures.emplace_back(smooth.begin() + 48, smooth.end());
        const auto sea = testing::trend_season(60, 5.0, 0.0, 2.0, 12, 0.7 * i);
        c.histories.push_back(testing::make_series(std::vector<double>(sea.begin(), sea.begin() + 48), 12));
        c.futures.emplace_back(sea.begin() + 48, sea.end());
    }
    return c;
}

}  // namespace fixtures
