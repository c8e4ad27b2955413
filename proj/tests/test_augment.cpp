#include <doctest.h>

#include <algorithm>
#include <functional>
#include <random>

#include "common.hpp"
#include "tidecast/augment.hpp"
#include "tidecast/error.hpp"
#include "tidecast/rng.hpp"

using namespace tidecast;

namespace {

// Exhaustive minimum over every monotone warping path.
double brute_dtw(const std::vector<double>& a, const std::vector<double>& b) {
    std::function<double(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> double {
        const double c = (a[i] - b[j]) * (a[i] - b[j]);
        if (i + 1 == a.size() && j + 1 == b.size()) return c;
        double best = std::numeric_limits<double>::infinity();
        if (i + 1 < a.size()) best = std::min(best, go(i + 1, j));
        if (j + 1 < b.size()) best = std::min(best, go(i, j + 1));
        if (i + 1 < a.size() && j + 1 < b.size()) best = std::min(best, go(i + 1, j + 1));
        return c + best;
    };
    return go(0, 0);
}

std::vector<double> noisy(std::size_t n, double sigma, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, sigma);
    auto v = testing::trend_season(n, 10.0, 0.1, 2.0, 12);
    for (double& x : v) x += g(rng);
    return v;
}

}  // namespace

TEST_CASE("frequency aggregation") {
    const auto s = testing::make_series({1, 2, 3, 4}, 7);
    const auto sum = frequency_aggregate(s, 2, AggregateMode::sum);
    CHECK(std::vector<double>(sum.values().begin(), sum.values().end()) == std::vector<double>{3, 7});
    const auto s5 = testing::make_series({1, 2, 3, 4, 5}, 7);
    const auto mean = frequency_aggregate(s5, 2, AggregateMode::mean);
    CHECK(std::vector<double>(mean.values().begin(), mean.values().end()) == std::vector<double>{1.5, 3.5});
    const auto c = testing::make_series(std::vector<double>(21, 4.25), 7);
    for (int f : {2, 3, 7}) {
        const auto agg = frequency_aggregate(c, f, AggregateMode::mean);
        for (double v : agg.values()) CHECK(v == 4.25);
    }
    CHECK(aggregated_frequency(Frequency::of(FreqClass::day), 7).cls == FreqClass::week);
    CHECK(aggregated_frequency(Frequency::of(FreqClass::hour), 24).cls == FreqClass::day);
    CHECK(aggregated_frequency(Frequency::of(FreqClass::month), 3).cls == FreqClass::quarter);
    const auto m = aggregated_frequency(Frequency::of(FreqClass::minute), 5);
    CHECK(m.cls == FreqClass::minute);
    CHECK(m.multiple == 5);
    CHECK_THROWS_AS(frequency_aggregate(s, 1, AggregateMode::sum), UsageError);
    CHECK_THROWS_AS(frequency_aggregate(s, 5, AggregateMode::sum), UsageError);
}

TEST_CASE("mbb variants rearrange residual blocks") {
    const auto s = testing::make_series(noisy(96, 0.5, 3), 12);
    const auto r = mbb_augment_detailed(s, 12, 0, 5, 11);
    CHECK(r.block_len == 24);
    REQUIRE(r.variants.size() == 5);
    const auto& d = r.decomposition;
    for (const auto& v : r.variants) {
        for (std::size_t t = 0; t < s.size(); ++t) {
            const std::size_t b = t / r.block_len;
            const double resid = v.series[t] - (d.trend[t] + d.seasonal[t]);
            CHECK(std::abs(resid - d.residual[v.block_starts[b] + t % r.block_len]) <= 1e-9);
        }
    }
}

TEST_CASE("mbb on a noiseless series reproduces it") {
    const auto s = testing::make_series(testing::trend_season(120, 5.0, 0.2, 3.0, 12), 12);
    for (const auto& v : mbb_augment(s, 12, 0, 4, 2))
        CHECK(testing::max_abs_diff(std::vector<double>(v.values().begin(), v.values().end()),
                                    std::vector<double>(s.values().begin(), s.values().end())) <= 1e-6);
}

TEST_CASE("mbb residual mean is unbiased within three standard errors") {
    const auto s = testing::make_series(noisy(240, 1.0, 9), 12);
    const auto r = mbb_augment_detailed(s, 12, 12, 200, 4);
    double target = 0.0;
    for (double x : r.decomposition.residual) target += x;
    target /= static_cast<double>(s.size());
    std::vector<double> means;
    for (const auto& v : r.variants) {
        double m = 0.0;
        for (std::size_t t = 0; t < s.size(); ++t) m += v.series[t] - r.decomposition.trend[t] - r.decomposition.seasonal[t];
        means.push_back(m / static_cast<double>(s.size()));
    }
    double mu = 0.0, var = 0.0;
    for (double m : means) mu += m / static_cast<double>(means.size());
    for (double m : means) var += (m - mu) * (m - mu) / static_cast<double>(means.size() - 1);
    CHECK(std::abs(mu - target) <= 3.0 * std::sqrt(var / static_cast<double>(means.size())));
}

TEST_CASE("dtw basics") {
    const std::vector<double> x{1, 5, 2, 8};
    CHECK(dtw_cost(x, x) == 0.0);
    CHECK(dtw_cost(std::vector<double>{0}, std::vector<double>{5}) == 25.0);
    const std::vector<double> a{1, 2, 3}, b{1, 2, 2, 3};
    CHECK(dtw_cost(a, b) == brute_dtw(a, b));
    const auto r = dtw(a, b);
    CHECK(r.path.front() == std::pair<std::size_t, std::size_t>{0, 0});
    CHECK(r.path.back() == std::pair<std::size_t, std::size_t>{2, 3});
    double along = 0.0;
    for (auto [i, j] : r.path) along += (a[i] - b[j]) * (a[i] - b[j]);
    CHECK(along == r.cost);
    CHECK_THROWS_AS(dtw_cost(std::vector<double>{}, a), UsageError);
}

TEST_CASE("dtw equals exhaustive enumeration on random short pairs") {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> len(1, 6);
    std::uniform_int_distribution<int> val(-3, 3);
    for (int k = 0; k < 60; ++k) {
        std::vector<double> a(static_cast<std::size_t>(len(rng))), b(static_cast<std::size_t>(len(rng)));
        for (double& v : a) v = val(rng);
        for (double& v : b) v = val(rng);
        CHECK(dtw_cost(a, b) == brute_dtw(a, b));
    }
}

TEST_CASE("dba fixed points and monotone objective") {
    const std::vector<double> x{1, 3, 2, 5, 4};
    const std::vector<std::vector<double>> copies(4, x);
    const auto r = dba_detailed(copies, x, 10, 0.0);
    CHECK(testing::max_abs_diff(r.barycenter, x) <= 1e-12);
    CHECK(r.objective.back() == 0.0);

    // Members no longer than the barycenter: every cell is matched once per member.
    const std::vector<std::vector<double>> consts{std::vector<double>(6, 1.0), std::vector<double>(4, 3.0)};
    for (double v : dba(consts, std::vector<double>{0, 5, 1, 4, 2, 7}, 10, 0.0)) CHECK(v == doctest::Approx(2.0));

    std::mt19937_64 rng(8);
    std::normal_distribution<double> g;
    std::vector<std::vector<double>> rs(5, std::vector<double>(20));
    for (auto& s : rs)
        for (double& v : s) v = g(rng);
    const auto dr = dba_detailed(rs, rs[0], 20, 0.0);
    for (std::size_t i = 1; i < dr.objective.size(); ++i) CHECK(dr.objective[i] <= dr.objective[i - 1]);
}

TEST_CASE("sbd and k-shape") {
    std::vector<double> s(40), shifted(40), ramp(40);
    for (std::size_t t = 0; t < 40; ++t) {
        s[t] = std::sin(0.5 * static_cast<double>(t));
        shifted[t] = std::sin(0.5 * static_cast<double>(t) + 1.0);
        ramp[t] = static_cast<double>(t);
    }
    CHECK(sbd(s, s) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(sbd(s, shifted) < sbd(s, ramp));
    const auto z = z_normalize(s);
    double m = 0.0;
    for (double v : z) m += v;
    CHECK(std::abs(m) <= 1e-12);

    std::vector<std::vector<double>> data;
    for (int i = 0; i < 10; ++i) data.push_back(s);
    for (int i = 0; i < 10; ++i) data.push_back(ramp);
    const auto c = kshape_cluster(data, 2, 3);
    for (int i = 1; i < 10; ++i) CHECK(c.labels[static_cast<std::size_t>(i)] == c.labels[0]);
    for (int i = 11; i < 20; ++i) CHECK(c.labels[static_cast<std::size_t>(i)] == c.labels[10]);
    CHECK(c.labels[0] != c.labels[10]);

    std::vector<std::vector<double>> three{s, ramp, std::vector<double>(40)};
    for (std::size_t t = 0; t < 40; ++t) three[2][t] = (t % 5 == 0) ? 1.0 : 0.0;
    auto labels = kshape_cluster(three, 3, 1).labels;
    std::sort(labels.begin(), labels.end());
    CHECK(labels == std::vector<int>{0, 1, 2});
    CHECK_THROWS_AS(kshape_cluster(three, 4, 1), UsageError);
}

TEST_CASE("shifted sinusoids share one cluster") {
    std::vector<std::vector<double>> data;
    for (int k = 0; k < 6; ++k) {
        std::vector<double> v(64);
        for (std::size_t t = 0; t < v.size(); ++t) v[t] = std::sin(2.0 * std::numbers::pi * static_cast<double>(t + k) / 16.0);
        data.push_back(v);
    }
    const auto c = kshape_cluster(data, 1, 5);
    for (const auto& v : data) CHECK(sbd(c.centroids[0], v) <= 0.05);
}

TEST_CASE("dba augmentation") {
    const auto x = testing::make_series(testing::trend_season(48, 5, 0.1, 2, 12), 12, "x");
    const std::vector<TimeSeries> same{x, x.derive("x2", {x.values().begin(), x.values().end()}),
                                       x.derive("x3", {x.values().begin(), x.values().end()})};
    for (const auto& out : dba_augment(same, 1, 3, 4))
        CHECK(testing::max_abs_diff({out.values().begin(), out.values().end()}, {x.values().begin(), x.values().end()}) <= 1e-12);
    CHECK(dba_augment(same, 1, 0, 4).empty());
}

TEST_CASE("dirichlet mixup") {
    Rng rng = make_rng(1);
    for (int i = 0; i < 200; ++i) {
        const auto w = sample_dirichlet(0.5, 4, rng);
        double s = 0.0;
        for (double v : w) {
            CHECK(v >= 0.0);
            s += v;
        }
        CHECK(std::abs(s - 1.0) <= 1e-12);
    }
    std::vector<double> mean(3, 0.0);
    for (int i = 0; i < 10000; ++i) {
        const auto w = sample_dirichlet(1.0, 3, rng);
        for (int k = 0; k < 3; ++k) mean[static_cast<std::size_t>(k)] += w[static_cast<std::size_t>(k)] / 10000.0;
    }
    for (double m : mean) CHECK(std::abs(m - 1.0 / 3.0) <= 0.01);

    const std::vector<TimeSeries> two{testing::make_series(std::vector<double>(10, 1.0), 12, "a"),
                                      testing::make_series(std::vector<double>(10, 3.0), 12, "b")};
    for (const auto& v : mixup_augment_detailed(two, 2, 1.0, 10, 5)) {
        const double expect = two[v.members[0]][0] * v.weights[0] + two[v.members[1]][0] * v.weights[1];
        for (double x : v.series.values()) {
            CHECK(x >= 1.0);
            CHECK(x <= 3.0);
            CHECK(x == doctest::Approx(expect).epsilon(1e-12));
        }
    }
    const auto forced = mixup_augment_detailed(two, 2, 1.0, 3, 5, [](int m, Rng&) {
        std::vector<double> w(static_cast<std::size_t>(m), 0.0);
        w[0] = 1.0;
        return w;
    });
    for (const auto& v : forced) CHECK(v.series.values()[0] == two[v.members[0]][0]);
    CHECK_THROWS_AS(mixup_augment(two, 3, 1.0, 1, 0), UsageError);
}
