#include <doctest.h>

#include <random>

#include "common.hpp"
#include "tidecast/baselines.hpp"
#include "tidecast/error.hpp"

using namespace tidecast;

TEST_CASE("naive and seasonal naive") {
    CHECK(naive_forecast(std::vector<double>{1, 2, 3}, 2) == std::vector<double>{3, 3});
    CHECK(seasonal_naive(std::vector<double>{1, 2, 1, 2}, 2, 3) == std::vector<double>{1, 2, 1});
    CHECK(naive_forecast(std::vector<double>{1, 2, 3}, 0).empty());
    CHECK_THROWS_AS(naive_forecast(std::vector<double>{}, 2), UsageError);

    const SeasonalNaiveForecaster own(0);
    const auto s = testing::make_series({1, 2, 3, 1, 2, 3}, 3);
    CHECK(own.predict_series(s, 4) == std::vector<double>{1, 2, 3, 1});
}

TEST_CASE("simple exponential smoothing") {
    for (double v : ses_forecast(std::vector<double>(10, 4.0), 0.3, 5)) CHECK(v == 4.0);
    const std::vector<double> h{3, 1, 4, 1, 5};
    CHECK(ses_forecast(h, 1.0, 3) == naive_forecast(h, 3));
    const auto f = ses_forecast(std::vector<double>{0, 10}, 0.5, 2);
    CHECK(f == std::vector<double>{5, 5});
    CHECK_THROWS_AS(ses_forecast(h, 0.0, 1), UsageError);
}

TEST_CASE("AR fit recovers generator coefficients") {
    std::vector<double> y{1.0};
    for (int t = 1; t < 60; ++t) y.push_back(0.8 * y.back());
    const auto m = ar_fit(y, 1);
    CHECK(m.coefficients[0] == doctest::Approx(0.8).epsilon(1e-6));
    CHECK(std::abs(m.intercept) <= 1e-6);

    for (double v : ar_predict(ar_fit(std::vector<double>(20, 5.0), 2), std::vector<double>(20, 5.0), 4))
        CHECK(v == doctest::Approx(5.0).epsilon(1e-9));

    std::vector<double> line(30);
    for (std::size_t t = 0; t < line.size(); ++t) line[t] = 2.0 * static_cast<double>(t);
    const auto lm = ar_fit(line, 2);
    const auto f = ar_predict(lm, line, 2);
    CHECK(std::abs(f[0] - 60.0) <= 1e-6);
    CHECK(std::abs(f[1] - 62.0) <= 1e-6);

    CHECK_THROWS_AS(ar_fit(std::vector<double>{1, 2, 3, 4}, 2), UsageError);
}

TEST_CASE("AR noise floor and differencing") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g(0.0, 0.5);
    std::vector<double> y{0.0};
    for (int t = 1; t < 2000; ++t) y.push_back(0.6 * y.back() + g(rng));
    const auto m = ar_fit(y, 1);
    CHECK(m.coefficients[0] == doctest::Approx(0.6).epsilon(0.05));
    CHECK(m.residual_std * m.residual_std <= 0.25 * 1.1);

    std::vector<double> walk{10.0};
    for (int t = 1; t < 50; ++t) walk.push_back(walk.back() + 1.5);
    const auto dm = ar_fit(walk, 1, true);
    CHECK(dm.differenced);
    const auto f = ar_predict(dm, walk, 3);
    CHECK(f[2] == doctest::Approx(walk.back() + 4.5).epsilon(1e-9));
}

TEST_CASE("singular designs fall back to ridge") {
    const auto m = ar_fit(std::vector<double>(30, 2.0), 3);
    CHECK(m.ridge_used);
    for (double v : ar_predict(m, std::vector<double>(30, 2.0), 3)) CHECK(std::isfinite(v));
}

TEST_CASE("pooled normalized AR serves any scale") {
    std::vector<std::vector<double>> ss;
    for (double scale : {1.0, 100.0}) ss.push_back(testing::trend_season(96, 10.0 * scale, 0.0, 2.0 * scale, 12));
    const auto m = ar_fit_pooled(ss, 12, true);
    CHECK(m.normalized);
    const auto f1 = ar_predict(m, ss[0], 6);
    const auto f2 = ar_predict(m, ss[1], 6);
    for (std::size_t i = 0; i < 6; ++i) CHECK(f2[i] == doctest::Approx(100.0 * f1[i]).epsilon(1e-9));
    CHECK(LinearARModel::from_json(m.to_json()).coefficients == m.coefficients);
}

TEST_CASE("confidence map") {
    CHECK(confidence_from_residual(0.0, 2.0) == 1.0);
    CHECK(confidence_from_residual(2.0, 2.0) == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(confidence_from_residual(2.0, 1.0) < confidence_from_residual(1.0, 1.0));
    const std::vector<double> h{1, 2, 3, 4, 100};
    CHECK(robust_scale(h) == doctest::Approx(1.4826));
    CHECK(robust_scale(std::vector<double>{1, 1, 1, 5}) > 0.0);
}

TEST_CASE("forecaster confidence prefers predictable histories") {
    const SeasonalNaiveForecaster sn(12);
    const auto periodic = testing::trend_season(96, 10, 0, 3, 12);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0.0, 3.0);
    std::vector<double> noise(96);
    for (double& v : noise) v = 10 + g(rng);
    CHECK(sn.confidence(periodic, 12) == doctest::Approx(1.0));
    CHECK(sn.confidence(noise, 12) < 0.7);
    const LocalArForecaster ar(12);
    CHECK(ar.predict(periodic, 12).size() == 12);
    CHECK(ar.predict(std::vector<double>{1.0, 2.0, 3.0}, 2).size() == 2);
}

TEST_CASE("least squares residuals are orthogonal to the regressors") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> y{0.0, 0.5};
    for (int t = 2; t < 300; ++t) y.push_back(0.5 * y[t - 1] - 0.2 * y[t - 2] + 1.0 + g(rng));
    const auto m = ar_fit(y, 3);
    REQUIRE_FALSE(m.ridge_used);
    std::vector<double> dots(4, 0.0);
    for (std::size_t t = 3; t < y.size(); ++t) {
        double pred = m.intercept;
        for (std::size_t i = 0; i < 3; ++i) pred += m.coefficients[i] * y[t - 1 - i];
        const double e = y[t] - pred;
        dots[0] += e;
        for (std::size_t i = 0; i < 3; ++i) dots[i + 1] += e * y[t - 1 - i];
    }
    for (double d : dots) CHECK(std::abs(d) <= 1e-8);
}

TEST_CASE("confidence is scale invariant") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> y(120), big(120);
    for (std::size_t t = 0; t < y.size(); ++t) {
        y[t] = 5.0 + std::sin(0.5 * static_cast<double>(t)) + 0.3 * g(rng);
        big[t] = 40.0 * y[t];
    }
    const auto m = ar_fit(y, 4);
    const auto mb = ar_fit(big, 4);
    CHECK(baseline_confidence(m, y, 6) == doctest::Approx(baseline_confidence(mb, big, 6)).epsilon(1e-6));
    const LocalArForecaster ar(4);
    CHECK(ar.confidence(y, 6) == doctest::Approx(ar.confidence(big, 6)).epsilon(1e-6));
    const double c = ar.confidence(y, 6);
    CHECK(c > 0.0);
    CHECK(c <= 1.0);
}
