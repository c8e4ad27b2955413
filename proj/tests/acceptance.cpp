// Prints one PASS/FAIL line per acceptance criterion; exits 1 if any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "common.hpp"
#include "fixtures.hpp"
#include "tidecast/augment.hpp"
#include "tidecast/decomp.hpp"
#include "tidecast/dromix.hpp"
#include "tidecast/eval.hpp"
#include "tidecast/fusion.hpp"
#include "tidecast/pipeline.hpp"
#include "tidecast/rng.hpp"
#include "tidecast/tsfm.hpp"

using namespace tidecast;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

class Clock {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// Enumerates every monotone path; each path cost is accumulated from (0,0) onward.
double brute_dtw(const std::vector<double>& a, const std::vector<double>& b) {
    double best = std::numeric_limits<double>::infinity();
    std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double acc) {
        acc += (a[i] - b[j]) * (a[i] - b[j]);
        if (i + 1 == a.size() && j + 1 == b.size()) {
            best = std::min(best, acc);
            return;
        }
        if (i + 1 < a.size()) walk(i + 1, j, acc);
        if (j + 1 < b.size()) walk(i, j + 1, acc);
        if (i + 1 < a.size() && j + 1 < b.size()) walk(i + 1, j + 1, acc);
    };
    walk(0, 0, 0.0);
    return best;
}

Outcome stl_reconstruction() {
    Clock clock;
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    double worst = 0.0;
    for (int k = 0; k < 50; ++k) {
        const int period = 4 + static_cast<int>(u(rng) * 20);
        const auto n = static_cast<std::size_t>(period * (3 + static_cast<int>(u(rng) * 8)));
        auto y = testing::trend_season(n, 100.0 * u(rng), u(rng) - 0.5, 10.0 * u(rng), period, 6.0 * u(rng));
        for (double& v : y) v += g(rng) * 3.0 * u(rng);
        const auto d = stl_decompose(y, period);
        for (std::size_t t = 0; t < n; ++t) worst = std::max(worst, std::abs(d.trend[t] + d.seasonal[t] + d.residual[t] - y[t]));
    }
    const double s = clock.seconds();
    return {worst <= 1e-9 && s < 5.0, "max_err=" + fmt("%.3g", worst) + " time=" + fmt("%.2f", s) + "s"};
}

Outcome dtw_oracle() {
    Clock clock;
    std::mt19937_64 rng(202);
    std::uniform_int_distribution<int> len(1, 6);
    std::uniform_real_distribution<double> val(-5.0, 5.0);
    int mismatches = 0;
    for (int k = 0; k < 200; ++k) {
        std::vector<double> a(static_cast<std::size_t>(len(rng))), b(static_cast<std::size_t>(len(rng)));
        for (double& v : a) v = val(rng);
        for (double& v : b) v = val(rng);
        if (dtw_cost(a, b) != brute_dtw(a, b)) ++mismatches;
    }
    const double s = clock.seconds();
    return {mismatches == 0 && s < 10.0, "pairs=200 mismatches=" + std::to_string(mismatches) + " time=" + fmt("%.2f", s) + "s"};
}

Outcome dba_monotone() {
    std::mt19937_64 rng(303);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_int_distribution<int> len(5, 30), count(2, 6);
    int increases = 0;
    for (int k = 0; k < 20; ++k) {
        std::vector<std::vector<double>> set(static_cast<std::size_t>(count(rng)));
        for (auto& s : set) {
            s.resize(static_cast<std::size_t>(len(rng)));
            for (double& v : s) v = g(rng);
        }
        const auto r = dba_detailed(set, set[0], 30, 0.0);
        for (std::size_t i = 1; i < r.objective.size(); ++i)
            if (r.objective[i] > r.objective[i - 1]) ++increases;
    }
    const std::vector<double> x{2.0, -1.0, 0.5, 3.0, 3.0, 1.5};
    const std::vector<std::vector<double>> copies(5, x);
    const auto fixed = dba(copies, x, 10, 0.0);
    const double drift = testing::max_abs_diff(fixed, x);
    return {increases == 0 && drift <= 1e-12,
            "instances=20 increases=" + std::to_string(increases) + " fixed_point_err=" + fmt("%.3g", drift)};
}

Outcome mbb_identities() {
    std::mt19937_64 rng(404);
    std::normal_distribution<double> g(0.0, 0.7);
    auto y = testing::trend_season(144, 30.0, 0.2, 5.0, 12);
    for (double& v : y) v += g(rng);
    const auto s = testing::make_series(y, 12);
    const auto r = mbb_augment_detailed(s, 12, 0, 8, 5);
    const auto& d = r.decomposition;
    double identity = 0.0;
    bool blocks_ok = true;
    for (const auto& v : r.variants) {
        for (std::size_t b = 0; b * r.block_len < s.size(); ++b) {
            std::vector<double> got, want;
            for (std::size_t t = b * r.block_len; t < std::min(s.size(), (b + 1) * r.block_len); ++t) {
                const double resid = v.series[t] - (d.trend[t] + d.seasonal[t]);
                got.push_back(resid);
                want.push_back(d.residual[v.block_starts[b] + t % r.block_len]);
            }
            for (std::size_t i = 0; i < got.size(); ++i) identity = std::max(identity, std::abs(got[i] - want[i]));
            std::sort(got.begin(), got.end());
            std::sort(want.begin(), want.end());
            for (std::size_t i = 0; i < got.size(); ++i) blocks_ok = blocks_ok && std::abs(got[i] - want[i]) <= 1e-9;
        }
    }
    const auto clean = testing::make_series(testing::trend_season(120, 5.0, 0.2, 3.0, 12), 12);
    double clean_err = 0.0;
    for (const auto& v : mbb_augment(clean, 12, 0, 4, 6))
        for (std::size_t t = 0; t < clean.size(); ++t) clean_err = std::max(clean_err, std::abs(v[t] - clean[t]));
    return {identity <= 1e-9 && blocks_ok && clean_err <= 1e-6,
            "identity_err=" + fmt("%.3g", identity) + " block_multisets=" + (blocks_ok ? "ok" : "bad") +
                " noiseless_err=" + fmt("%.3g", clean_err)};
}

Outcome dirichlet_simplex() {
    Rng rng = make_rng(505);
    double worst_sum = 0.0, worst_mean = 0.0;
    bool nonneg = true;
    for (int m : {2, 3, 5}) {
        std::vector<double> mean(static_cast<std::size_t>(m), 0.0);
        for (int i = 0; i < 10000; ++i) {
            const auto w = sample_dirichlet(1.0, m, rng);
            double s = 0.0;
            for (std::size_t k = 0; k < w.size(); ++k) {
                nonneg = nonneg && w[k] >= 0.0;
                s += w[k];
                mean[k] += w[k] / 10000.0;
            }
            worst_sum = std::max(worst_sum, std::abs(s - 1.0));
        }
        for (double v : mean) worst_mean = std::max(worst_mean, std::abs(v - 1.0 / m));
    }
    return {nonneg && worst_sum <= 1e-12 && worst_mean <= 0.01,
            "sum_err=" + fmt("%.3g", worst_sum) + " mean_err=" + fmt("%.4f", worst_mean)};
}

Outcome group_dro() {
    auto w = GroupWeights::uniform({"a", "b"}, 0.1, 0.0);
    const auto n = update_weights(w, LossMap{{"a", 1.0}, {"b", 0.0}});
    const double ea = std::abs(n.weights.at("a") - 0.52498), eb = std::abs(n.weights.at("b") - 0.47501);
    auto c = GroupWeights::uniform({"a", "b", "c"}, 0.1, 0.0);
    bool monotone = true, simplex = true;
    double last = c.weights.at("b");
    for (int i = 0; i < 100; ++i) {
        c = update_weights(c, LossMap{{"a", 0.0}, {"b", 1.0}, {"c", 0.0}});
        double s = 0.0;
        for (const auto& [k, v] : c.weights) {
            simplex = simplex && v >= 0.0;
            s += v;
        }
        simplex = simplex && std::abs(s - 1.0) <= 1e-12;
        monotone = monotone && c.weights.at("b") > last;
        last = c.weights.at("b");
    }
    auto sm = GroupWeights::uniform({"a", "b", "c"}, 0.3, 0.1);
    for (int i = 0; i < 50; ++i) {
        sm = update_weights(sm, LossMap{{"a", 2.0 * i}, {"b", 0.0}, {"c", 1.0}});
        double s = 0.0;
        for (const auto& [k, v] : sm.weights) s += v;
        simplex = simplex && std::abs(s - 1.0) <= 1e-12;
    }
    return {ea <= 1e-4 && eb <= 1e-4 && monotone && simplex && last > 0.999,
            "update=[" + fmt("%.5f", n.weights.at("a")) + "," + fmt("%.5f", n.weights.at("b")) + "] monotone=" +
                (monotone ? "yes" : "no") + " simplex=" + (simplex ? "yes" : "no")};
}

Outcome student_t() {
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double nu = 2.05 + 0.1 * (i % 83), mu = 2.0 * std::sin(0.37 * i), sigma = 0.1 + 0.02 * (i % 71);
        const double y = -8.0 + 0.016 * i;
        const double z = (y - mu) / sigma;
        const double dens = std::pow(1.0 + z * z / nu, -(nu + 1.0) / 2.0) / (sigma * std::sqrt(nu) * std::beta(0.5, nu / 2.0));
        worst = std::max(worst, std::abs(tsfm::student_t_nll(y, {nu, mu, sigma}) + std::log(dens)));
    }
    double gauss = 0.0;
    for (double y : {-3.0, -0.5, 0.0, 1.0, 2.5}) {
        const double ref = 0.5 * std::log(2.0 * std::numbers::pi * 0.64) + (y - 0.2) * (y - 0.2) / (2.0 * 0.64);
        gauss = std::max(gauss, std::abs(tsfm::student_t_nll(y, {1e6, 0.2, 0.8}) - ref));
    }
    return {worst <= 1e-10 && gauss <= 1e-3, "grid_err=" + fmt("%.3g", worst) + " gaussian_err=" + fmt("%.3g", gauss)};
}

tsfm::ModelConfig toy_config() {
    tsfm::ModelConfig c;
    c.n_layers = 1;
    c.d_model = 16;
    c.n_heads = 2;
    c.n_experts = 2;
    c.top_k = 2;
    c.d_ff = 16;
    c.patch_lengths = {4};
    c.context_patches = 3;
    return c;
}

Outcome gradient_check() {
    Clock clock;
    tsfm::Params p = tsfm::init_params(toy_config(), 808);
    std::mt19937_64 rng(808);
    std::normal_distribution<double> g(0.0, 0.3);
    for (auto& [name, a] : p.arrays)
        for (double& v : a.values) v += 0.05 * g(rng);
    auto vals = testing::trend_season(30, 3.0, 0.05, 1.5, 7);
    for (double& v : vals) v += g(rng);
    const std::vector<tsfm::TrainSample> batch{tsfm::make_sample(testing::make_series(vals), 30, 4, 3),
                                               tsfm::make_sample(testing::make_series(vals), 11, 4, 3)};
    tsfm::Arrays grad = tsfm::zeros_like(p.arrays);
    tsfm::batch_loss_grad(p, batch, grad);
    const double h = 1e-4;
    double worst = 0.0;
    std::size_t coords = 0;
    for (auto& [name, a] : p.arrays) {
        for (std::size_t i = 0; i < a.values.size(); ++i) {
            const double keep = a.values[i];
            a.values[i] = keep + h;
            const double up = tsfm::batch_loss(p, batch);
            a.values[i] = keep - h;
            const double down = tsfm::batch_loss(p, batch);
            a.values[i] = keep;
            const double fd = (up - down) / (2.0 * h), an = grad.at(name).values[i];
            worst = std::max(worst, std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6}));
            ++coords;
        }
    }
    const double s = clock.seconds();
    return {worst <= 1e-4 && s < 60.0,
            "coordinates=" + std::to_string(coords) + " max_rel_err=" + fmt("%.3g", worst) + " time=" + fmt("%.2f", s) + "s"};
}

std::vector<double> flatten(const tsfm::ForwardOutput& fo) {
    std::vector<double> out;
    for (const auto& tok : fo.dist)
        for (const auto& d : tok) out.insert(out.end(), {d.nu, d.mu, d.sigma});
    return out;
}

Outcome moe_degeneracy() {
    auto one = toy_config();
    one.n_experts = 1;
    one.top_k = 1;
    const auto dense = tsfm::init_params(one, 909);
    auto many = toy_config();
    many.n_experts = 4;
    many.top_k = 2;
    auto moe = tsfm::init_params(many, 910);
    for (auto& [name, a] : moe.arrays) {
        const auto at = name.find(".expert");
        if (at != std::string::npos) {
            a = dense.arrays.at(name.substr(0, at) + ".expert0" + name.substr(name.find('.', at + 1)));
        } else if (name.find("gate.W") == std::string::npos) {
            a = dense.arrays.at(name);
        }
    }
    const auto s = testing::make_series(testing::trend_season(40, 5, 0.1, 2, 12));
    const auto tk = tsfm::tokenize(s, 4, 3).tokens;
    const double moe_err = testing::max_abs_diff(flatten(tsfm::forward(dense, tk, s.freq())), flatten(tsfm::forward(moe, tk, s.freq())));

    double causal = 0.0;
    const auto before = tsfm::forward(moe, tk, s.freq());
    for (std::size_t j = 1; j < tk.size(); ++j) {
        auto moved = tk;
        for (double& v : moved[j].values) v -= 1.3;
        const auto after = tsfm::forward(moe, moved, s.freq());
        for (std::size_t i = 0; i < j; ++i)
            for (std::size_t q = 0; q < before.dist[i].size(); ++q) {
                causal = std::max(causal, std::abs(after.dist[i][q].mu - before.dist[i][q].mu));
                causal = std::max(causal, std::abs(after.dist[i][q].sigma - before.dist[i][q].sigma));
                causal = std::max(causal, std::abs(after.dist[i][q].nu - before.dist[i][q].nu));
            }
    }
    return {moe_err <= 1e-9 && causal <= 1e-12, "moe_vs_dense=" + fmt("%.3g", moe_err) + " causal_drift=" + fmt("%.3g", causal)};
}

Outcome overfit_oracle() {
    Clock clock;
    const tsfm::ModelConfig cfg;  // desk defaults
    std::vector<TimeSeries> train;
    std::vector<std::vector<double>> futures;
    for (int i = 0; i < 6; ++i) {
        const auto y = testing::trend_season(216, 40.0 + 8.0 * i, 0.05 + 0.03 * i, 4.0 + i, 12, 0.9 * i);
        train.push_back(testing::make_series(std::vector<double>(y.begin(), y.begin() + 192), 12, "f" + std::to_string(i)));
        futures.emplace_back(y.begin() + 192, y.end());
    }
    tsfm::TrainOptions o;
    o.steps = 600;
    o.batch_size = 16;
    const auto r = tsfm::train(cfg, DatasetMap{{"family", train}}, o, 1010);
    std::vector<std::vector<double>> preds;
    for (const auto& s : train) preds.push_back(tsfm::forecast(r.params, s, 24).point);
    const double accuracy = fixtures::pooled_fa(futures, preds);
    const double s = clock.seconds();
    return {!r.diverged && accuracy >= 0.9 && s <= 300.0,
            "steps=" + std::to_string(r.steps_completed) + " fa=" + fmt("%.4f", accuracy) + " time=" + fmt("%.1f", s) + "s"};
}

Outcome router_fusion() {
    ModelPool pool;
    pool.add("drift", std::make_shared<fixtures::DriftForecaster>());
    pool.add("sn", std::make_shared<SeasonalNaiveForecaster>(12));
    const auto embed = statistical_embedder();
    const auto ex = routing_examples(pool, embed, DatasetMap{{"mix", fixtures::regime_series(1111, 24)}}, 12, 3);
    const auto router = train_router(ex, RouterTrainOptions{}, 1111);
    std::vector<std::vector<double>> truth, routed, avg, drift, sn;
    for (const auto& s : fixtures::regime_series(1112, 20)) {
        const auto v = s.values();
        const auto hist = s.derive(s.id(), std::vector<double>(v.begin(), v.end() - 12));
        truth.emplace_back(v.end() - 12, v.end());
        const auto fc = pool.forecasts(hist, 12);
        drift.push_back(fc[0]);
        sn.push_back(fc[1]);
        avg.push_back(fuse_average(fc));
        routed.push_back(route_fuse(router, embed, hist, pool, 12).forecast);
    }
    const double fa_routed = fixtures::pooled_fa(truth, routed), fa_avg = fixtures::pooled_fa(truth, avg);
    const double fa_best = std::max(fixtures::pooled_fa(truth, drift), fixtures::pooled_fa(truth, sn));

    ModelPool dom;
    dom.add("sn", std::make_shared<SeasonalNaiveForecaster>(12));
    dom.add("naive", std::make_shared<NaiveForecaster>());
    std::vector<TimeSeries> tr, held;
    for (int i = 0; i < 8; ++i) {
        tr.push_back(testing::make_series(testing::trend_season(80, 10 + i, 0, 2 + 0.3 * i, 12, 0.4 * i)));
        held.push_back(testing::make_series(testing::trend_season(80, 10.5 + i, 0, 2.15 + 0.3 * i, 12, 0.2 + 0.4 * i)));
    }
    const auto r2 = train_router(routing_examples(dom, embed, DatasetMap{{"a", tr}}, 12, 3), RouterTrainOptions{}, 1113);
    double mean_w = 0.0;
    for (const auto& s : held) mean_w += route_fuse(r2, embed, s, dom, 12).weights[0] / static_cast<double>(held.size());
    return {fa_routed >= fa_best - 0.01 && fa_routed >= fa_avg && mean_w >= 0.9,
            "routed_fa=" + fmt("%.4f", fa_routed) + " best_member_fa=" + fmt("%.4f", fa_best) + " avg_fa=" + fmt("%.4f", fa_avg) +
                " winner_weight=" + fmt("%.4f", mean_w)};
}

Outcome learned_linear() {
    std::mt19937_64 rng(1212);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<std::vector<double>> rows;
    std::vector<double> truth, noisy;
    for (int i = 0; i < 40; ++i) {
        rows.push_back({g(rng), g(rng), g(rng)});
        truth.push_back(0.25 * rows.back()[0] - 1.5 * rows.back()[1] + 0.75 * rows.back()[2] + 2.0);
        noisy.push_back(0.5 * (rows.back()[0] + rows.back()[2]) + 0.3 * g(rng));
    }
    const auto fit = fit_linear_fusion(rows, truth);
    const double err = std::max({std::abs(fit.weights[0] - 0.25), std::abs(fit.weights[1] + 1.5), std::abs(fit.weights[2] - 0.75),
                                 std::abs(fit.intercept - 2.0)});
    const auto nf = fit_linear_fusion(rows, noisy);
    double mse = 0.0;
    std::vector<double> member(3, 0.0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        double p = nf.intercept;
        for (std::size_t k = 0; k < 3; ++k) {
            p += nf.weights[k] * rows[i][k];
            member[k] += std::pow(rows[i][k] - noisy[i], 2) / static_cast<double>(rows.size());
        }
        mse += std::pow(p - noisy[i], 2) / static_cast<double>(rows.size());
    }
    const double best = *std::min_element(member.begin(), member.end());
    return {err <= 1e-6 && mse <= best, "weight_err=" + fmt("%.3g", err) + " mse=" + fmt("%.4f", mse) + " best_member_mse=" + fmt("%.4f", best)};
}

Outcome coordination() {
    const auto c = fixtures::coordination_setup();
    const SeasonalNaiveForecaster large(12);
    CoordinationConfig cfg;
    cfg.tau1 = 0.8;
    cfg.tau2 = 0.99;
    cfg.steps = 400;
    const auto trained = coordinate_train(c.s1, large, c.histories, 12, cfg, 1313);
    CoordinationConfig zero = cfg;
    zero.lambda = 0.0;
    const auto z = coordinate_train(c.s1, large, c.histories, 12, zero, 1313);
    double drift = std::abs(z.s2.intercept - c.s1.intercept);
    for (std::size_t q = 0; q < c.s1.coefficients.size(); ++q)
        drift = std::max(drift, std::abs(z.s2.coefficients[q] - c.s1.coefficients[q]));

    CoordinationConfig open = cfg, closed = cfg;
    open.tau1 = 0.0;
    closed.tau1 = 1.0;
    std::size_t to_s1 = 0, to_large = 0;
    double e1 = 0.0, e2 = 0.0;
    std::vector<std::vector<double>> truth, cascade, small;
    for (std::size_t i = 0; i < c.histories.size(); ++i) {
        to_s1 += coordinate_infer(c.s1, trained.s2, large, c.histories[i], 12, open).route == Route::s1 ? 1 : 0;
        to_large += coordinate_infer(c.s1, trained.s2, large, c.histories[i], 12, closed).route == Route::large ? 1 : 0;
        const auto v = c.histories[i].values();
        truth.push_back(c.futures[i]);
        cascade.push_back(coordinate_infer(c.s1, trained.s2, large, c.histories[i], 12, cfg).forecast);
        small.push_back(ar_predict(c.s1, v, 12));
        const bool challenging = baseline_confidence(c.s1, v, 12) <= cfg.tau1 &&
                                 large.confidence_series(c.histories[i], 12) > cfg.large_threshold();
        if (!challenging) continue;
        const auto f1 = ar_predict(c.s1, v, 12), f2 = ar_predict(trained.s2, v, 12);
        for (std::size_t h = 0; h < 12; ++h) {
            e1 += std::abs(f1[h] - c.futures[i][h]);
            e2 += std::abs(f2[h] - c.futures[i][h]);
        }
    }
    const std::size_t n = c.histories.size();
    const double fa_c = fixtures::pooled_fa(truth, cascade), fa_s = fixtures::pooled_fa(truth, small);
    return {to_s1 == n && to_large == n && drift <= 1e-8 && fa_c >= fa_s && e2 < e1 && trained.challenging > 0,
            "tau0_s1=" + std::to_string(to_s1) + "/" + std::to_string(n) + " tau1_large=" + std::to_string(to_large) + "/" +
                std::to_string(n) + " lambda0_drift=" + fmt("%.3g", drift) + " cascade_fa=" + fmt("%.4f", fa_c) +
                " s1_fa=" + fmt("%.4f", fa_s) + " challenging_abs_err s1=" + fmt("%.3f", e1) + " s2=" + fmt("%.3f", e2)};
}

Outcome metric_identities() {
    std::mt19937_64 rng(1414);
    std::uniform_real_distribution<double> u(-100.0, 100.0), c(0.01, 1000.0);
    bool exact = true;
    double scale_err = 0.0;
    for (int k = 0; k < 1000; ++k) {
        std::vector<double> t(9), f(9), ts(9), fs(9);
        const double s = c(rng);
        for (std::size_t i = 0; i < 9; ++i) {
            t[i] = u(rng);
            f[i] = u(rng);
            ts[i] = s * t[i];
            fs[i] = s * f[i];
        }
        exact = exact && fa(t, f) == 1.0 - wmape(t, f);
        scale_err = std::max(scale_err, std::abs(wmape(ts, fs) - wmape(t, f)) / wmape(t, f));
    }
    const double worked = wmape(std::vector<double>{100, 200}, std::vector<double>{110, 180});
    return {exact && scale_err <= 1e-12 && worked == 0.1,
            std::string("fa_identity=") + (exact ? "exact" : "broken") + " scale_rel_err=" + fmt("%.3g", scale_err) +
                " worked=" + fmt("%.17g", worked)};
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

Outcome reproducibility() {
    Clock clock;
    const auto root = fs::temp_directory_path() / "tidecast_acceptance_runs";
    fs::remove_all(root);
    const auto cfg = PipelineConfig::desk_default();
    run_pipeline(cfg, root / "first");
    run_pipeline(cfg, root / "second");
    std::size_t files = 0, differing = 0;
    for (const auto& e : fs::recursive_directory_iterator(root / "first")) {
        if (!e.is_regular_file()) continue;
        ++files;
        const auto other = root / "second" / fs::relative(e.path(), root / "first");
        if (!fs::exists(other) || slurp(e.path()) != slurp(other)) ++differing;
    }
    const bool model = fs::exists(root / "first" / "model.json") && fs::exists(root / "first" / "report.csv");
    fs::remove_all(root);
    return {model && files > 0 && differing == 0,
            "files=" + std::to_string(files) + " differing=" + std::to_string(differing) + " time=" + fmt("%.1f", clock.seconds()) + "s"};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"stl reconstruction", stl_reconstruction},
        {"dtw exhaustive oracle", dtw_oracle},
        {"dba monotone objective and fixed point", dba_monotone},
        {"moving block bootstrap identities", mbb_identities},
        {"dirichlet mixup weights", dirichlet_simplex},
        {"group dro updates", group_dro},
        {"student-t likelihood", student_t},
        {"tsfm gradient finite differences", gradient_check},
        {"moe degeneracy and causality", moe_degeneracy},
        {"end-to-end overfit oracle", overfit_oracle},
        {"router fusion", router_fusion},
        {"learned linear fusion", learned_linear},
        {"large/small coordination", coordination},
        {"metric identities", metric_identities},
        {"pipeline reproducibility", reproducibility},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += o.pass ? 0 : 1;
        std::printf("criterion %zu %s: %s %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%zu criteria, %d failed\n", criteria.size(), failures);
    return failures == 0 ? 0 : 1;
}
