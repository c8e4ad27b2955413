#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "tidecast/core_data.hpp"

namespace testing {

inline tidecast::TimeSeries make_series(std::vector<double> values, int period = 12, std::string id = "s",
                                        tidecast::FreqClass cls = tidecast::FreqClass::day) {
    return tidecast::TimeSeries(std::move(id), tidecast::Frequency::of(cls, period),
                                tidecast::parse_timestamp("2024-01-01"), std::move(values));
}

inline std::vector<double> trend_season(std::size_t n, double intercept, double slope, double amp, int period,
                                        double phase = 0.0) {
    std::vector<double> v(n);
    for (std::size_t t = 0; t < n; ++t)
        v[t] = intercept + slope * static_cast<double>(t) +
               amp * std::cos(2.0 * std::numbers::pi * static_cast<double>(t) / period + phase);
    return v;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace testing
