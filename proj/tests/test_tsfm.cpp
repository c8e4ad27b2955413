#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "common.hpp"
#include "tidecast/error.hpp"
#include "tidecast/eval.hpp"
#include "tidecast/tsfm.hpp"

using namespace tidecast;
using namespace tidecast::tsfm;

namespace {

ModelConfig tiny_config() {
    ModelConfig c;
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

double t_density(double y, double nu, double mu, double sigma) {
    const double z = (y - mu) / sigma;
    return std::pow(1.0 + z * z / nu, -(nu + 1.0) / 2.0) / (sigma * std::sqrt(nu) * std::beta(0.5, nu / 2.0));
}

std::vector<double> flatten(const ForwardOutput& fo) {
    std::vector<double> out;
    for (const auto& tok : fo.dist) {
        for (const auto& d : tok) {
            out.push_back(d.nu);
            out.push_back(d.mu);
            out.push_back(d.sigma);
        }
    }
    return out;
}

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "tidecast_tsfm_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f), {});
}

}  // namespace

TEST_CASE("student-t density against a closed form") {
    const StudentT base{3.0, 0.0, 1.0};
    CHECK(student_t_nll(0.0, base) == doctest::Approx(-std::log(t_density(0.0, 3.0, 0.0, 1.0))).epsilon(1e-12));
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double y = -10.0 + 0.02 * i;
        const StudentT d{2.1 + 0.05 * (i % 97), 0.3 * std::sin(i), 0.2 + 0.01 * (i % 53)};
        worst = std::max(worst, std::abs(student_t_nll(y, d) + std::log(t_density(y, d.nu, d.mu, d.sigma))));
    }
    CHECK(worst <= 1e-10);

    const StudentT wide{1e6, 0.4, 1.7};
    for (double y : {-2.0, 0.0, 0.4, 3.5}) {
        const double gauss = 0.5 * std::log(2.0 * std::numbers::pi * 1.7 * 1.7) + (y - 0.4) * (y - 0.4) / (2.0 * 1.7 * 1.7);
        CHECK(std::abs(student_t_nll(y, wide) - gauss) <= 1e-3);
    }
    for (double mu : {-0.5, -0.1, 0.1, 0.5}) CHECK(student_t_nll(0.0, {3.0, mu, 1.0}) > student_t_nll(0.0, base));
    CHECK_THROWS(student_t_nll(0.0, {3.0, 0.0, 0.0}));
}

TEST_CASE("student-t gradient matches differences") {
    const StudentT d{4.0, 0.3, 0.8};
    const double y = 1.1, h = 1e-6;
    const auto g = student_t_nll_grad(y, d);
    CHECK(g.nu == doctest::Approx((student_t_nll(y, {4.0 + h, 0.3, 0.8}) - student_t_nll(y, {4.0 - h, 0.3, 0.8})) / (2 * h)).epsilon(1e-6));
    CHECK(g.mu == doctest::Approx((student_t_nll(y, {4.0, 0.3 + h, 0.8}) - student_t_nll(y, {4.0, 0.3 - h, 0.8})) / (2 * h)).epsilon(1e-6));
    CHECK(g.sigma == doctest::Approx((student_t_nll(y, {4.0, 0.3, 0.8 + h}) - student_t_nll(y, {4.0, 0.3, 0.8 - h})) / (2 * h)).epsilon(1e-6));
    CHECK(std::abs(student_t_nll_grad(0.3, d).mu) <= 1e-12);
}

TEST_CASE("tokenization") {
    std::vector<double> v(32);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
    const auto a = tokenize(testing::make_series(v), 8, 4);
    REQUIRE(a.tokens.size() == 4);
    for (const auto& t : a.tokens)
        for (auto m : t.mask) CHECK(m == 1);

    const auto b = tokenize(testing::make_series(std::vector<double>(v.begin(), v.begin() + 10)), 8, 2);
    REQUIRE(b.tokens.size() == 2);
    int padded = 0;
    for (std::size_t j = 0; j < 8; ++j) padded += b.tokens[0].mask[j] == 0 ? 1 : 0;
    CHECK(padded == 6);
    for (std::size_t j = 0; j < 6; ++j) CHECK(b.tokens[0].values[j] == 0.0);

    for (const auto& t : tokenize(testing::make_series(std::vector<double>(20, 7.0)), 8, 3).tokens)
        for (double x : t.values) CHECK(x == 0.0);

    const auto c = tokenize(testing::make_series({1.0, 2.0}), 8, 3);
    CHECK(c.tokens.size() == 3);
    CHECK_FALSE(c.tokens[0].observed());
}

TEST_CASE("identical experts act as one dense feed-forward block") {
    ModelConfig one = tiny_config();
    one.n_experts = 1;
    one.top_k = 1;
    const Params dense = init_params(one, 3);
    for (int top_k : {1, 2, 3}) {
        ModelConfig many = tiny_config();
        many.n_experts = 3;
        many.top_k = top_k;
        Params moe = init_params(many, 4);
        for (auto& [name, a] : moe.arrays) {
            if (name.find(".expert") != std::string::npos) {
                const auto tail = name.substr(name.find('.', name.find(".expert") + 1));
                a = dense.arrays.at(name.substr(0, name.find(".expert")) + ".expert0" + tail);
            } else if (name.find("gate.W") == std::string::npos) {
                a = dense.arrays.at(name);
            }
        }
        const auto s = testing::make_series(testing::trend_season(40, 5, 0.1, 2, 12));
        const auto tk = tokenize(s, 4, 3);
        const auto x = flatten(forward(dense, tk.tokens, s.freq()));
        const auto y = flatten(forward(moe, tk.tokens, s.freq()));
        CHECK(testing::max_abs_diff(x, y) <= 1e-9);
    }
}

TEST_CASE("zero gate weighs experts uniformly") {
    ModelConfig c = tiny_config();
    c.n_experts = 3;
    c.top_k = 3;
    Params p = init_params(c, 8);
    for (auto& v : p.arrays.at("layer0.gate.W").values) v = 0.0;
    Params swapped = p;
    for (const char* part : {".W1", ".b1", ".W2", ".b2"}) {
        std::swap(swapped.arrays.at(std::string("layer0.expert0") + part), swapped.arrays.at(std::string("layer0.expert2") + part));
    }
    const auto s = testing::make_series(testing::trend_season(40, 5, 0.1, 2, 12));
    const auto tk = tokenize(s, 4, 3);
    CHECK(testing::max_abs_diff(flatten(forward(p, tk.tokens, s.freq())), flatten(forward(swapped, tk.tokens, s.freq()))) <= 1e-12);

    Params gated = init_params(c, 8);
    Params gated_swapped = gated;
    for (const char* part : {".W1", ".b1", ".W2", ".b2"}) {
        std::swap(gated_swapped.arrays.at(std::string("layer0.expert0") + part),
                  gated_swapped.arrays.at(std::string("layer0.expert2") + part));
    }
    CHECK(testing::max_abs_diff(flatten(forward(gated, tk.tokens, s.freq())),
                                flatten(forward(gated_swapped, tk.tokens, s.freq()))) > 1e-9);
}

TEST_CASE("attention is causal") {
    const Params p = init_params(tiny_config(), 5);
    const auto s = testing::make_series(testing::trend_season(40, 5, 0.1, 2, 12));
    auto tk = tokenize(s, 4, 3).tokens;
    const auto before = forward(p, tk, s.freq());
    for (std::size_t j = 0; j < tk.size(); ++j) {
        auto moved = tk;
        for (double& v : moved[j].values) v += 0.7;
        const auto after = forward(p, moved, s.freq());
        for (std::size_t i = 0; i < j; ++i) {
            for (std::size_t q = 0; q < before.dist[i].size(); ++q) {
                CHECK(std::abs(after.dist[i][q].mu - before.dist[i][q].mu) <= 1e-12);
                CHECK(std::abs(after.dist[i][q].sigma - before.dist[i][q].sigma) <= 1e-12);
            }
        }
        CHECK(std::abs(after.dist[j][0].mu - before.dist[j][0].mu) > 0.0);
    }
    for (const auto& tok : before.dist) {
        for (const auto& d : tok) {
            CHECK(d.nu > 2.0);
            CHECK(d.sigma > 0.0);
        }
    }
}

TEST_CASE("gradients match central differences") {
    ModelConfig c = tiny_config();
    c.positional_embedding = true;
    Params p = init_params(c, 21);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g(0.0, 0.3);
    for (auto& [name, a] : p.arrays)
        for (double& v : a.values) v += 0.05 * g(rng);

    std::vector<double> vals = testing::trend_season(30, 3, 0.05, 1.5, 7);
    for (double& v : vals) v += g(rng);
    std::vector<TrainSample> batch{make_sample(testing::make_series(vals), 30, 4, 3),
                                   make_sample(testing::make_series(vals), 13, 4, 3)};
    batch[1].weight = 0.5;

    Arrays grad = zeros_like(p.arrays);
    const double loss = batch_loss_grad(p, batch, grad);
    CHECK(loss == doctest::Approx(batch_loss(p, batch)).epsilon(1e-14));

    const double h = 1e-4;
    double worst = 0.0;
    std::string worst_name;
    std::size_t checked = 0;
    for (auto& [name, a] : p.arrays) {
        for (std::size_t i = 0; i < a.values.size(); ++i) {
            const double keep = a.values[i];
            a.values[i] = keep + h;
            const double up = batch_loss(p, batch);
            a.values[i] = keep - h;
            const double down = batch_loss(p, batch);
            a.values[i] = keep;
            const double fd = (up - down) / (2.0 * h);
            const double an = grad.at(name).values[i];
            const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6});
            if (rel > worst) {
                worst = rel;
                worst_name = name;
            }
            ++checked;
        }
    }
    CAPTURE(worst_name);
    CHECK(checked > 1000);
    CHECK(worst <= 1e-4);
}

TEST_CASE("masked positions carry no gradient") {
    const Params p = init_params(tiny_config(), 6);
    const auto s = testing::make_series({1.0, 2.0, 4.0, 3.0, 5.0, 2.0, 6.0, 1.0});
    TrainSample a = make_sample(s, 8, 4, 3);
    REQUIRE_FALSE(a.tokens[0].observed());
    TrainSample b = a;
    for (std::size_t j = 0; j < b.target_mask.size(); ++j)
        if (!b.target_mask[j]) b.targets[j] = 1e3;
    for (std::size_t j = 0; j < 4; ++j)
        if (!b.tokens[1].mask[j]) b.tokens[1].values[j] = 55.0;
    Arrays ga = zeros_like(p.arrays), gb = zeros_like(p.arrays);
    const double la = batch_loss_grad(p, std::vector<TrainSample>{a}, ga);
    const double lb = batch_loss_grad(p, std::vector<TrainSample>{b}, gb);
    CHECK(la == lb);
    CHECK(ga == gb);
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
    ModelConfig c = tiny_config();
    c.learning_rate = 0.0;
    DatasetMap d{{"a", {testing::make_series(testing::trend_season(60, 3, 0, 1, 12))}}};
    TrainOptions o;
    o.steps = 5;
    o.batch_size = 2;
    const auto r = train(c, d, o, 3);
    CHECK(r.params.arrays == init_params(c, 3).arrays);
    CHECK(r.steps_completed == 5);
}

TEST_CASE("overfitting a sinusoid") {
    ModelConfig c = tiny_config();
    c.d_model = 32;
    c.n_heads = 4;
    c.d_ff = 32;
    c.patch_lengths = {8};
    c.context_patches = 4;
    c.learning_rate = 1e-3;
    const double amp = 3.0;
    const auto y = testing::trend_season(200, 10.0, 0.0, amp, 16);
    DatasetMap d{{"sine", {testing::make_series(std::vector<double>(y.begin(), y.begin() + 168), 16)}}};
    TrainOptions o;
    o.steps = 600;
    o.full_batch = true;
    const auto r = train(c, d, o, 1);
    REQUIRE(r.losses.size() == 600);
    for (std::size_t i = 1; i < 50; ++i) CHECK(r.losses[i] < r.losses[i - 1]);

    const auto history = testing::make_series(std::vector<double>(y.begin(), y.begin() + 168), 16);
    const auto f = forecast(r.params, history, 32);
    CHECK(std::abs(f.point[0] - y[168]) <= 0.05 * amp);
    CHECK(fa(std::span<const double>(y).subspan(168, 32), f.point) >= 0.9);

    const auto ramp = testing::make_series(testing::trend_season(168, 0, 0.5, 0, 16), 16);
    const auto e1 = embed_series(r.params, history);
    const auto e2 = embed_series(r.params, ramp);
    double dot = 0, n1 = 0, n2 = 0;
    for (std::size_t i = 0; i < e1.size(); ++i) {
        dot += e1[i] * e2[i];
        n1 += e1[i] * e1[i];
        n2 += e2[i] * e2[i];
    }
    CHECK(dot / std::sqrt(n1 * n2) < 0.99);
}

TEST_CASE("robust weighting keeps a floor on unlearnable data") {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> noise(120);
    for (double& v : noise) v = g(rng);
    DatasetMap d{{"noise", {testing::make_series(noise)}},
                 {"sine", {testing::make_series(testing::trend_season(120, 5, 0, 2, 12))}}};
    TrainOptions o;
    o.steps = 60;
    o.batch_size = 4;
    o.dro = true;
    o.dro_every = 5;
    const auto r = train(tiny_config(), d, o, 2);
    REQUIRE_FALSE(r.weight_trajectory.empty());
    for (const auto& w : r.weight_trajectory) CHECK(w.at("noise") >= o.smoothing / 2.0 - 1e-12);
    for (double l : r.losses) CHECK(std::isfinite(l));
    const auto again = train(tiny_config(), d, o, 2);
    CHECK(again.losses == r.losses);
    CHECK(again.params.arrays == r.params.arrays);
}

TEST_CASE("recursive forecast loop") {
    ModelConfig c;
    const Params p = init_params(c, 1);
    const auto s = testing::make_series(testing::trend_season(100, 5, 0.1, 2, 7));
    const auto f = forecast(p, s, 20);
    CHECK(f.point.size() == 20);
    CHECK(f.dist.size() == 20);
    CHECK(f.forward_passes == 3);
    CHECK(forecast(p, s, 8).forward_passes == 1);
    CHECK(forecast(p, s, 3).forward_passes == 1);
    for (double v : f.point) CHECK(std::isfinite(v));
    CHECK(f.confidence > 0.0);
    CHECK(f.confidence <= 1.0);
    CHECK_THROWS_AS(forecast(p, s, 0), UsageError);

    const auto e = embed_series(p, s);
    CHECK(e.size() == static_cast<std::size_t>(c.d_model));
    CHECK(e == embed_series(p, s));
}

TEST_CASE("persistence") {
    const Params p = init_params(tiny_config(), 17);
    const auto a = scratch("a.json"), b = scratch("b.json");
    save(p, a);
    const Params back = load(a);
    save(back, b);
    CHECK(slurp(a) == slurp(b));
    CHECK(back.arrays == p.arrays);

    const auto s = testing::make_series(testing::trend_season(50, 5, 0.1, 2, 7));
    const auto f0 = forecast(p, s, 9);
    const auto f1 = forecast(back, s, 9);
    CHECK(f0.point == f1.point);

    auto j = to_json(p);
    j["arrays"]["layer0.attn.Wq"]["shape"] = {16, 15};
    {
        std::ofstream f(scratch("bad.json"));
        f << j.dump();
    }
    try {
        load(scratch("bad.json"));
        FAIL("tampered file loaded");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("layer0.attn.Wq") != std::string::npos);
    }
    auto v = to_json(p);
    v["format_version"] = kFormatVersion + 1;
    CHECK_THROWS_AS(params_from_json(v), DataError);
    CHECK_THROWS_AS(load(scratch("missing.json")), DataError);
    std::filesystem::remove_all(a.parent_path());
}
