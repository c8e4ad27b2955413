#include <doctest.h>

#include <random>

#include "common.hpp"
#include "tidecast/dromix.hpp"
#include "tidecast/error.hpp"

using namespace tidecast;

namespace {

double weight_sum(const GroupWeights& w) {
    double s = 0.0;
    for (const auto& [k, v] : w.weights) s += v;
    return s;
}

}  // namespace

TEST_CASE("excess loss clamps at zero") {
    const LossMap cur{{"a", 3.0}, {"b", 1.0}};
    const LossMap ref{{"a", 1.0}, {"b", 1.0}};
    const auto e = excess_loss(cur, ref);
    CHECK(e.at("a") == 2.0);
    CHECK(e.at("b") == 0.0);
    CHECK(excess_loss(LossMap{{"a", -4.0}}, LossMap{{"a", 1.0}}).at("a") == 0.0);
    for (const auto& [k, v] : excess_loss(ref, ref)) CHECK(v == 0.0);
    CHECK_THROWS(excess_loss(LossMap{{"a", 1.0}}, LossMap{{"c", 1.0}}));
}

TEST_CASE("exponentiated gradient step") {
    auto w = GroupWeights::uniform({"a", "b"}, 0.1, 0.0);
    const auto n = update_weights(w, LossMap{{"a", 1.0}, {"b", 0.0}});
    const double e = std::exp(0.1);
    CHECK(std::abs(n.weights.at("a") - e / (1.0 + e)) <= 1e-12);
    CHECK(std::abs(n.weights.at("a") - 0.52498) <= 1e-4);
    CHECK(std::abs(n.weights.at("b") - 0.47501) <= 1e-4);

    GroupWeights skew = GroupWeights::uniform({"a", "b", "c"}, 0.3, 0.1);
    skew.weights = {{"a", 0.2}, {"b", 0.5}, {"c", 0.3}};
    const auto same = update_weights(skew, LossMap{{"a", 2.0}, {"b", 2.0}, {"c", 2.0}});
    for (const auto& [k, v] : skew.weights) {
        const double expect = 0.9 * v + 0.1 / 3.0;
        CHECK(std::abs(same.weights.at(k) - expect) <= 1e-12);
    }
    const auto flat = update_weights(GroupWeights::uniform({"a", "b", "c"}, 0.3, 0.1), LossMap{{"a", 2.0}, {"b", 2.0}, {"c", 2.0}});
    for (const auto& [k, v] : flat.weights) CHECK(std::abs(v - 1.0 / 3.0) <= 1e-12);

    CHECK_THROWS_AS(update_weights(w, LossMap{{"a", std::nan("")}, {"b", 0.0}}), NumericError);
}

TEST_CASE("constant dominant excess concentrates the weight") {
    auto w = GroupWeights::uniform({"a", "b", "c"}, 0.1, 0.0);
    const LossMap e{{"a", 0.0}, {"b", 1.0}, {"c", 0.0}};
    double last = w.weights.at("b");
    for (int step = 0; step < 100; ++step) {
        w = update_weights(w, e);
        CHECK(std::abs(weight_sum(w) - 1.0) <= 1e-12);
        CHECK(w.weights.at("b") > last);
        last = w.weights.at("b");
    }
    CHECK(last > 0.999);
}

TEST_CASE("batch sampling") {
    DatasetMap d;
    d["a"] = {testing::make_series(std::vector<double>(30, 1.0), 12, "a0")};
    d["b"] = {testing::make_series(std::vector<double>(30, 2.0), 12, "b0")};
    auto w = GroupWeights::uniform({"a", "b"});
    w.weights = {{"a", 1.0}, {"b", 0.0}};
    for (const auto& item : sample_batch(d, w, 50, 10, 1)) {
        CHECK(item.dataset == "a");
        CHECK(item.window.size() == 10);
    }
    const auto u = GroupWeights::uniform({"a", "b"});
    const auto many = sample_batch(d, u, 10000, 10, 2);
    std::size_t na = 0;
    for (const auto& item : many) na += item.dataset == "a" ? 1 : 0;
    CHECK(std::abs(static_cast<double>(na) / 10000.0 - 0.5) <= 0.02);
    CHECK_THROWS_AS(sample_batch(d, u, 0, 10, 1), UsageError);
    const auto again = sample_batch(d, u, 100, 10, 2);
    for (std::size_t i = 0; i < again.size(); ++i) CHECK(again[i].dataset == many[i].dataset);
}

TEST_CASE("reference losses") {
    const std::vector<TimeSeries> flat{testing::make_series(std::vector<double>(40, 3.0))};
    ReferenceOptions naive;
    naive.kind = ReferenceModel::naive;
    CHECK(fit_reference(flat, naive).loss == 0.0);

    std::mt19937_64 rng(9);
    std::normal_distribution<double> g(0.0, 0.7);
    std::vector<double> y{0.0}, shocks{0.0};
    for (int t = 1; t < 1500; ++t) {
        shocks.push_back(g(rng));
        y.push_back(0.7 * y.back() + shocks.back());
    }
    ReferenceOptions ar;
    ar.order = 1;
    const auto r = fit_reference(std::vector<TimeSeries>{testing::make_series(y)}, ar);
    REQUIRE(r.points == 300);
    double floor = 0.0;
    for (std::size_t t = 1200; t < 1500; ++t) floor += shocks[t] * shocks[t] / 300.0;
    CHECK(r.loss <= floor * 1.1);
    CHECK(r.used == ReferenceModel::ar);

    const auto single = fit_reference(std::vector<TimeSeries>{testing::make_series({1, 3, 2, 5, 4})}, ar);
    CHECK(std::isfinite(single.loss));
    CHECK_THROWS(fit_reference(std::vector<TimeSeries>{}, ar));
}

TEST_CASE("weighting run is deterministic and stays on the simplex") {
    DatasetMap d;
    d["easy"] = {testing::make_series(testing::trend_season(120, 10, 0, 1, 12))};
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 2.0);
    std::vector<double> noisy(120);
    for (double& v : noisy) v = 10 + g(rng);
    d["noisy"] = {testing::make_series(noisy)};
    DroOptions o;
    o.steps = 30;
    o.batch_size = 8;
    const auto a = run_dro(d, o, 11);
    const auto b = run_dro(d, o, 11);
    CHECK(a.to_json() == b.to_json());
    CHECK(a.trajectory.size() == o.steps + 1);
    for (const auto& w : a.trajectory) {
        double s = 0.0;
        for (const auto& [k, v] : w) {
            CHECK(v >= 0.0);
            s += v;
        }
        CHECK(std::abs(s - 1.0) <= 1e-12);
    }
}
