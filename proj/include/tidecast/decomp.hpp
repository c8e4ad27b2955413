#pragma once

#include <span>
#include <vector>

#include "tidecast/core_data.hpp"

namespace tidecast {

// Additive decomposition: trend + seasonal + residual == original.
struct Decomposition {
    std::vector<double> trend;
    std::vector<double> seasonal;
    std::vector<double> residual;
};

// Tricube-weighted local polynomial regression of `values` against their
// indices 0..T-1. Each output point is fitted over its ceil(span*T) nearest
// neighbours; `degree` is 0 (local mean) or 1 (local line).
std::vector<double> loess(std::span<const double> values, double span, int degree);

// Same smoother on arbitrary sorted abscissae, evaluated at `at` (which may
// lie outside [x.front(), x.back()]; degree 1 then extrapolates the local line).
std::vector<double> loess_fit(std::span<const double> x, std::span<const double> y, std::span<const double> at,
                              std::size_t neighbours, int degree);

struct StlOptions {
    int inner_iters = 2;
    double seasonal_span = 0.6;  // fraction of each cycle-subseries
    double trend_span = 0.0;     // 0 selects 1.5 * period / T, clamped to (0, 1]
};

// Seasonal-trend decomposition by LOESS (no robustness iterations).
// Requires period >= 2 and T >= 2 * period.
Decomposition stl_decompose(std::span<const double> values, int period, const StlOptions& options = {});
Decomposition stl_decompose(const TimeSeries& series, int period, int inner_iters = 2);

}  // namespace tidecast
