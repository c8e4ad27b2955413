#include "tidecast/baselines.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "tidecast/core_data.hpp"
#include "tidecast/error.hpp"

namespace tidecast {

namespace {

void require_horizon_history(std::span<const double> history, const char* what) {
    if (history.empty()) throw UsageError(std::string(what) + ": empty history");
}

struct LsSolution {
    Eigen::VectorXd theta;
    bool ridge = false;
};

LsSolution solve_least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    qr.setThreshold(1e-10);
    LsSolution out;
    if (qr.rank() == x.cols()) {
        out.theta = qr.solve(y);
        return out;
    }
    Eigen::MatrixXd a = x.transpose() * x;
    a.diagonal().tail(a.rows() - 1).array() += kRidgeLambda;
    out.theta = a.ldlt().solve(x.transpose() * y);
    out.ridge = true;
    return out;
}

std::vector<double> model_space_series(std::span<const double> history, bool differenced, bool normalized) {
    std::vector<double> s;
    if (differenced) {
        for (std::size_t i = 1; i < history.size(); ++i) s.push_back(history[i] - history[i - 1]);
    } else {
        s.assign(history.begin(), history.end());
    }
    if (normalized && !s.empty()) {
        const NormStats st = norm_stats(s);
        s = normalize(s, st);
    }
    return s;
}

double one_step(const LinearARModel& m, std::span<const double> s, std::size_t t) {
    double v = m.intercept;
    for (int i = 0; i < m.order; ++i) v += m.coefficients[static_cast<std::size_t>(i)] * s[t - 1 - static_cast<std::size_t>(i)];
    return v;
}

LinearARModel fit_rows(const std::vector<std::vector<double>>& parts, int p) {
    std::size_t rows = 0;
    for (const auto& s : parts)
        if (s.size() > static_cast<std::size_t>(p)) rows += s.size() - static_cast<std::size_t>(p);
    if (rows < static_cast<std::size_t>(p) + 1) throw UsageError("ar_fit: not enough observations for order " + std::to_string(p));

    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows), p + 1);
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows));
    Eigen::Index r = 0;
    for (const auto& s : parts) {
        for (std::size_t t = static_cast<std::size_t>(p); t < s.size(); ++t, ++r) {
            x(r, 0) = 1.0;
            for (int i = 0; i < p; ++i) x(r, i + 1) = s[t - 1 - static_cast<std::size_t>(i)];
            y(r) = s[t];
        }
    }
    const LsSolution sol = solve_least_squares(x, y);
    LinearARModel m;
    m.order = p;
    m.intercept = sol.theta(0);
    m.coefficients.resize(static_cast<std::size_t>(p));
    for (int i = 0; i < p; ++i) m.coefficients[static_cast<std::size_t>(i)] = sol.theta(i + 1);
    m.ridge_used = sol.ridge;
    const Eigen::VectorXd resid = y - x * sol.theta;
    m.residual_std = std::sqrt(resid.squaredNorm() / static_cast<double>(rows));
    return m;
}

void check_fitted(const LinearARModel& m) {
    if (m.order < 1 || m.coefficients.size() != static_cast<std::size_t>(m.order))
        throw UsageError("AR model is not fitted");
}

}  // namespace

std::vector<double> naive_forecast(std::span<const double> history, std::size_t horizon) {
    require_horizon_history(history, "naive_forecast");
    return std::vector<double>(horizon, history.back());
}

std::vector<double> seasonal_naive(std::span<const double> history, int period, std::size_t horizon) {
    if (period < 1) throw UsageError("seasonal_naive: period must be >= 1");
    const auto p = static_cast<std::size_t>(period);
    if (history.size() < p) throw UsageError("seasonal_naive: history shorter than one period");
    std::vector<double> out(horizon);
    const std::size_t base = history.size() - p;
    for (std::size_t h = 0; h < horizon; ++h) out[h] = history[base + h % p];
    return out;
}

std::vector<double> ses_forecast(std::span<const double> history, double alpha, std::size_t horizon) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw UsageError("ses_forecast: alpha must lie in (0, 1]");
    require_horizon_history(history, "ses_forecast");
    double level = history[0];
    for (std::size_t t = 1; t < history.size(); ++t) level = alpha * history[t] + (1.0 - alpha) * level;
    return std::vector<double>(horizon, level);
}

nlohmann::json LinearARModel::to_json() const {
    return {{"order", order},
            {"intercept", intercept},
            {"coefficients", coefficients},
            {"residual_std", residual_std},
            {"differenced", differenced},
            {"normalized", normalized},
            {"ridge_used", ridge_used}};
}

LinearARModel LinearARModel::from_json(const nlohmann::json& j) {
    try {
        LinearARModel m;
        m.order = j.at("order").get<int>();
        m.intercept = j.at("intercept").get<double>();
        m.coefficients = j.at("coefficients").get<std::vector<double>>();
        m.residual_std = j.value("residual_std", 0.0);
        m.differenced = j.value("differenced", false);
        m.normalized = j.value("normalized", false);
        m.ridge_used = j.value("ridge_used", false);
        check_fitted(m);
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("AR model: ") + e.what());
    }
}

LinearARModel ar_fit(std::span<const double> history, int p, bool differenced) {
    if (p < 1) throw UsageError("ar_fit: order must be >= 1");
    const std::size_t need = 2 * static_cast<std::size_t>(p) + 1 + (differenced ? 1 : 0);
    if (history.size() < need)
        throw UsageError("ar_fit: history of length " + std::to_string(history.size()) + " is too short for order " +
                         std::to_string(p));
    std::vector<std::vector<double>> parts{model_space_series(history, differenced, false)};
    LinearARModel m = fit_rows(parts, p);
    m.differenced = differenced;
    return m;
}

LinearARModel ar_fit_pooled(std::span<const std::vector<double>> series, int p, bool normalized) {
    if (p < 1) throw UsageError("ar_fit_pooled: order must be >= 1");
    std::vector<std::vector<double>> parts;
    parts.reserve(series.size());
    for (const auto& s : series) parts.push_back(model_space_series(s, false, normalized));
    LinearARModel m = fit_rows(parts, p);
    m.normalized = normalized;
    return m;
}

ArSpace to_model_space(const LinearARModel& model, std::span<const double> history) {
    ArSpace sp;
    if (history.empty()) throw UsageError("AR model: empty history");
    sp.last_level = history.back();
    if (model.differenced) {
        for (std::size_t i = 1; i < history.size(); ++i) sp.series.push_back(history[i] - history[i - 1]);
    } else {
        sp.series.assign(history.begin(), history.end());
    }
    if (model.normalized && !sp.series.empty()) {
        const NormStats st = norm_stats(sp.series);
        sp.mean = st.mean;
        sp.scale = st.std;
        sp.series = normalize(sp.series, st);
    }
    return sp;
}

std::vector<double> from_model_space(const LinearARModel& model, const ArSpace& space, std::span<const double> path) {
    std::vector<double> out(path.begin(), path.end());
    if (model.normalized)
        for (double& v : out) v = v * space.scale + space.mean;
    if (model.differenced) {
        double level = space.last_level;
        for (double& v : out) {
            level += v;
            v = level;
        }
    }
    return out;
}

std::vector<double> ar_recurse(const LinearARModel& model, std::span<const double> lags, std::size_t horizon) {
    check_fitted(model);
    const auto p = static_cast<std::size_t>(model.order);
    if (lags.size() < p) throw UsageError("ar_predict: history shorter than model order");
    std::vector<double> buf(lags.end() - static_cast<std::ptrdiff_t>(p), lags.end());
    std::vector<double> out;
    out.reserve(horizon);
    for (std::size_t h = 0; h < horizon; ++h) {
        const double v = one_step(model, buf, buf.size());
        out.push_back(v);
        buf.push_back(v);
    }
    return out;
}

std::vector<double> ar_predict(const LinearARModel& model, std::span<const double> history, std::size_t horizon) {
    check_fitted(model);
    if (horizon == 0) return {};
    const ArSpace sp = to_model_space(model, history);
    const std::vector<double> path = ar_recurse(model, sp.series, horizon);
    return from_model_space(model, sp, path);
}

double robust_scale(std::span<const double> history) {
    if (history.empty()) return 0.0;
    std::vector<double> v(history.begin(), history.end());
    auto median = [](std::vector<double>& a) {
        const std::size_t n = a.size();
        std::nth_element(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(n / 2), a.end());
        double m = a[n / 2];
        if (n % 2 == 0) m = 0.5 * (m + *std::max_element(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(n / 2)));
        return m;
    };
    const double med = median(v);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::abs(history[i] - med);
    const double mad = 1.4826 * median(v);
    if (mad > 0.0) return mad;
    double mean = 0.0;
    for (double x : history) mean += x;
    mean /= static_cast<double>(history.size());
    double ss = 0.0;
    for (double x : history) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(history.size()));
}

double confidence_from_residual(double residual_std, double scale) {
    if (!(residual_std >= 0.0)) throw NumericError("confidence: residual must be a nonnegative number");
    return 1.0 / (1.0 + residual_std / (scale + 1e-8));
}

double baseline_confidence(const LinearARModel& model, std::span<const double> history, std::size_t horizon) {
    (void)horizon;
    check_fitted(model);
    const ArSpace sp = to_model_space(model, history);
    const auto p = static_cast<std::size_t>(model.order);
    double ss = 0.0;
    std::size_t n = 0;
    for (std::size_t t = p; t < sp.series.size(); ++t, ++n) {
        const double e = sp.series[t] - one_step(model, sp.series, t);
        ss += e * e;
    }
    const double resid = n > 0 ? std::sqrt(ss / static_cast<double>(n)) : model.residual_std;
    return confidence_from_residual(resid, robust_scale(sp.series));
}

namespace {

template <class OneStep>
double tail_confidence(std::span<const double> history, OneStep one_step) {
    const std::size_t n = history.size();
    if (n < 2) return 0.5;
    const std::size_t window = std::min<std::size_t>(n - 1, 64);
    double ss = 0.0;
    std::size_t count = 0;
    for (std::size_t t = n - window; t < n; ++t) {
        try {
            const double e = history[t] - one_step(t);
            ss += e * e;
            ++count;
        } catch (const UsageError&) {
        }
    }
    if (count == 0) return 0.5;
    return confidence_from_residual(std::sqrt(ss / static_cast<double>(count)), robust_scale(history));
}

}  // namespace

double Forecaster::confidence(std::span<const double> history, std::size_t horizon) const {
    (void)horizon;
    return tail_confidence(history, [&](std::size_t t) { return predict(history.first(t), 1).at(0); });
}

double Forecaster::confidence_series(const TimeSeries& history, std::size_t horizon) const {
    (void)horizon;
    const auto v = history.values();
    return tail_confidence(v, [&](std::size_t t) {
        const TimeSeries prefix = history.derive(history.id(), std::vector<double>(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(t)));
        return predict_series(prefix, 1).at(0);
    });
}

std::vector<double> NaiveForecaster::predict(std::span<const double> history, std::size_t horizon) const {
    return naive_forecast(history, horizon);
}

std::vector<double> SeasonalNaiveForecaster::predict(std::span<const double> history, std::size_t horizon) const {
    return seasonal_naive(history, period_, horizon);
}

std::vector<double> SeasonalNaiveForecaster::predict_series(const TimeSeries& history, std::size_t horizon) const {
    return seasonal_naive(history.values(), period_ > 0 ? period_ : history.freq().steps_per_cycle, horizon);
}

std::vector<double> SesForecaster::predict(std::span<const double> history, std::size_t horizon) const {
    return ses_forecast(history, alpha_, horizon);
}

LinearARModel LocalArForecaster::fit(std::span<const double> history) const {
    const std::size_t usable = history.size() - std::min<std::size_t>(history.size(), differenced_ ? 2 : 1);
    const int p = std::min<int>(order_, static_cast<int>(usable / 2));
    if (p < 1) throw UsageError("ar: history too short to fit");
    return ar_fit(history, p, differenced_);
}

std::vector<double> LocalArForecaster::predict(std::span<const double> history, std::size_t horizon) const {
    require_horizon_history(history, "ar");
    const std::size_t usable = history.size() - std::min<std::size_t>(history.size(), differenced_ ? 2 : 1);
    if (usable < 2) return naive_forecast(history, horizon);
    return ar_predict(fit(history), history, horizon);
}

double LocalArForecaster::confidence(std::span<const double> history, std::size_t horizon) const {
    const std::size_t usable = history.size() - std::min<std::size_t>(history.size(), differenced_ ? 2 : 1);
    if (usable < 2) return Forecaster::confidence(history, horizon);
    return baseline_confidence(fit(history), history, horizon);
}

}  // namespace tidecast
