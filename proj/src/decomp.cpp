#include "tidecast/decomp.hpp"

#include "tidecast/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tidecast {

namespace {

double tricube(double u) {
    if (u >= 1.0) return 0.0;
    const double c = 1.0 - u * u * u;
    return c * c * c;
}

// First index of the `q` contiguous points nearest to `a` in sorted `x`.
std::size_t window_start(std::span<const double> x, double a, std::size_t q) {
    std::size_t lo = 0;
    std::size_t hi = x.size() - q;
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (a - x[mid] > x[mid + q] - a) lo = mid + 1;
        else hi = mid;
    }
    return lo;
}

std::vector<double> moving_average(std::span<const double> v, std::size_t len) {
    std::vector<double> out(v.size() - len + 1);
    double acc = 0.0;
    for (std::size_t i = 0; i < len; ++i) acc += v[i];
    out[0] = acc / static_cast<double>(len);
    for (std::size_t i = 1; i < out.size(); ++i) {
        acc += v[i + len - 1] - v[i - 1];
        out[i] = acc / static_cast<double>(len);
    }
    return out;
}

}  // namespace

std::vector<double> loess_fit(std::span<const double> x, std::span<const double> y, std::span<const double> at,
                              std::size_t neighbours, int degree) {
    if (x.size() != y.size() || x.empty()) throw UsageError("loess: x and y must be non-empty and equal length");
    if (degree != 0 && degree != 1) throw UsageError("loess: degree must be 0 or 1");
    const std::size_t n = x.size();
    const std::size_t q = std::clamp<std::size_t>(neighbours, 1, n);
    if (q < static_cast<std::size_t>(degree) + 1) throw UsageError("loess: window too small for requested degree");

    std::vector<double> out(at.size());
    for (std::size_t k = 0; k < at.size(); ++k) {
        const double a = at[k];
        const std::size_t lo = window_start(x, a, q);
        const std::size_t hi = lo + q;
        // Abscissae are step indices; widening the radius by one step keeps
        // the farthest neighbour's weight positive.
        const double radius = std::max(a - x[lo], x[hi - 1] - a) + 1.0;

        double sw = 0.0, sx = 0.0, sy = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            const double w = tricube(std::abs(x[i] - a) / radius);
            sw += w;
            sx += w * x[i];
            sy += w * y[i];
        }
        const double xbar = sx / sw;
        const double ybar = sy / sw;
        double fit = ybar;
        if (degree == 1) {
            double sxx = 0.0, sxy = 0.0;
            for (std::size_t i = lo; i < hi; ++i) {
                const double w = tricube(std::abs(x[i] - a) / radius);
                const double dx = x[i] - xbar;
                sxx += w * dx * dx;
                sxy += w * dx * (y[i] - ybar);
            }
            if (sxx > 1e-12 * sw * radius * radius) fit += (sxy / sxx) * (a - xbar);
        }
        out[k] = fit;
    }
    return out;
}

std::vector<double> loess(std::span<const double> values, double span, int degree) {
    const std::size_t n = values.size();
    if (n < 3) throw UsageError("loess: need at least 3 points");
    if (!(span > 0.0 && span <= 1.0)) throw UsageError("loess: span must lie in (0, 1]");
    const auto q = static_cast<std::size_t>(std::ceil(span * static_cast<double>(n)));
    if (q < static_cast<std::size_t>(degree) + 1) throw UsageError("loess: window too small for requested degree");
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i);
    return loess_fit(x, values, x, q, degree);
}

Decomposition stl_decompose(std::span<const double> values, int period, const StlOptions& options) {
    if (period < 2) throw UsageError("stl: period must be at least 2");
    const std::size_t n = values.size();
    const auto p = static_cast<std::size_t>(period);
    if (n < 2 * p) {
        throw UsageError("stl: series of length " + std::to_string(n) + " is shorter than two periods (" +
                         std::to_string(2 * p) + ")");
    }
    if (options.inner_iters < 1) throw UsageError("stl: inner_iters must be positive");

    double trend_span = options.trend_span;
    if (trend_span <= 0.0) trend_span = std::min(1.0, 1.5 * static_cast<double>(period) / static_cast<double>(n));
    const auto trend_q = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(trend_span * static_cast<double>(n))), 2, n);

    std::vector<double> index(n);
    for (std::size_t i = 0; i < n; ++i) index[i] = static_cast<double>(i);

    Decomposition d;
    d.trend.assign(n, 0.0);
    d.seasonal.assign(n, 0.0);
    std::vector<double> extended(n + 2 * p);
    std::vector<double> sub_x, sub_y, sub_at;

    for (int iter = 0; iter < options.inner_iters; ++iter) {
        // Cycle-subseries smoothing, extended one cycle on both ends.
        for (std::size_t k = 0; k < p; ++k) {
            sub_y.clear();
            for (std::size_t t = k; t < n; t += p) sub_y.push_back(values[t] - d.trend[t]);
            const std::size_t m = sub_y.size();
            sub_x.resize(m);
            for (std::size_t j = 0; j < m; ++j) sub_x[j] = static_cast<double>(j);
            sub_at.resize(m + 2);
            for (std::size_t j = 0; j < m + 2; ++j) sub_at[j] = static_cast<double>(j) - 1.0;
            const auto q = std::clamp<std::size_t>(
                static_cast<std::size_t>(std::ceil(options.seasonal_span * static_cast<double>(m))), 2, m);
            const auto smooth = loess_fit(sub_x, sub_y, sub_at, q, 1);
            for (std::size_t j = 0; j < m + 2; ++j) extended[j * p + k] = smooth[j];
        }

        // Low-pass of the cycle-subseries: MA(p), MA(p), MA(3) maps length
        // T + 2p back to T and removes anything periodic in p.
        const auto low = moving_average(moving_average(moving_average(extended, p), p), 3);
        for (std::size_t t = 0; t < n; ++t) d.seasonal[t] = extended[t + p] - low[t];

        std::vector<double> deseasonal(n);
        for (std::size_t t = 0; t < n; ++t) deseasonal[t] = values[t] - d.seasonal[t];
        d.trend = loess_fit(index, deseasonal, index, trend_q, 1);
    }

    d.residual.resize(n);
    for (std::size_t t = 0; t < n; ++t) d.residual[t] = values[t] - d.trend[t] - d.seasonal[t];
    return d;
}

Decomposition stl_decompose(const TimeSeries& series, int period, int inner_iters) {
    StlOptions options;
    options.inner_iters = inner_iters;
    return stl_decompose(series.values(), period, options);
}

}  // namespace tidecast
