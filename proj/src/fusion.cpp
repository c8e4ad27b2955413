#include "tidecast/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "tidecast/error.hpp"
#include "tidecast/rng.hpp"
#include "tidecast/tsfm.hpp"

namespace tidecast {

// ---------------------------------------------------------------------------
// Pool

namespace {

void allow_keys(const nlohmann::json& j, std::initializer_list<const char*> keys) {
    for (const auto& [k, v] : j.items()) {
        bool ok = k == "name" || k == "kind";
        for (const char* a : keys) ok = ok || k == a;
        if (!ok) throw DataError("pool member: unknown key '" + k + "'");
    }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

std::unique_ptr<Forecaster> make_forecaster(const nlohmann::json& desc, const std::filesystem::path& base_dir) {
    if (!desc.is_object()) throw DataError("pool member must be a JSON object");
    try {
        const std::string kind = desc.at("kind").get<std::string>();
        if (kind == "naive") {
            allow_keys(desc, {});
            return std::make_unique<NaiveForecaster>();
        }
        if (kind == "seasonal_naive") {
            allow_keys(desc, {"period"});
            return std::make_unique<SeasonalNaiveForecaster>(desc.value("period", 0));
        }
        if (kind == "ses") {
            allow_keys(desc, {"alpha"});
            return std::make_unique<SesForecaster>(desc.value("alpha", 0.3));
        }
        if (kind == "ar") {
            allow_keys(desc, {"order", "differenced"});
            return std::make_unique<LocalArForecaster>(desc.value("order", 8), desc.value("differenced", false));
        }
        if (kind == "fitted_ar") {
            allow_keys(desc, {"model"});
            const auto& m = desc.at("model");
            if (m.is_string()) {
                const auto path = resolve(base_dir, m.get<std::string>());
                std::ifstream in(path);
                if (!in) throw DataError("cannot read AR model '" + path.string() + "'");
                return std::make_unique<FittedArForecaster>(LinearARModel::from_json(nlohmann::json::parse(in)));
            }
            return std::make_unique<FittedArForecaster>(LinearARModel::from_json(m));
        }
        if (kind == "tsfm") {
            allow_keys(desc, {"model", "freq"});
            const std::string rel = desc.at("model").get<std::string>();
            auto params = std::make_shared<const tsfm::Params>(tsfm::load(resolve(base_dir, rel)));
            const Frequency freq = Frequency::of(parse_freq_class(desc.value("freq", std::string("day"))));
            return std::make_unique<tsfm::TsfmForecaster>(std::move(params), freq, rel);
        }
        throw DataError("unknown forecaster kind '" + kind + "'");
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("pool member: ") + e.what());
    }
}

void ModelPool::add(std::string name, std::shared_ptr<const Forecaster> model, nlohmann::json meta) {
    if (!model) throw UsageError("pool: null model");
    for (const auto& m : members_)
        if (m.name == name) throw UsageError("pool: duplicate member name '" + name + "'");
    members_.push_back({std::move(name), std::move(model), std::move(meta)});
}

std::vector<std::string> ModelPool::names() const {
    std::vector<std::string> out;
    for (const auto& m : members_) out.push_back(m.name);
    return out;
}

std::vector<NamedModel> ModelPool::named() const {
    std::vector<NamedModel> out;
    for (const auto& m : members_) out.push_back({m.name, m.model.get()});
    return out;
}

ModelPool ModelPool::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    ModelPool pool;
    try {
        for (const auto& m : j.at("members")) {
            const std::string name = m.at("name").get<std::string>();
            pool.add(name, make_forecaster(m, base_dir), m);
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("pool: ") + e.what());
    } catch (const UsageError& e) {
        throw DataError(e.what());
    }
    return pool;
}

ModelPool ModelPool::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read pool file '" + path.string() + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("pool file '" + path.string() + "': " + e.what());
    }
    return from_json(j, path.parent_path());
}

nlohmann::json ModelPool::to_json() const {
    nlohmann::json members = nlohmann::json::array();
    for (const auto& m : members_) {
        nlohmann::json d = m.meta.is_object() && !m.meta.empty() ? m.meta : m.model->describe();
        d["name"] = m.name;
        members.push_back(std::move(d));
    }
    return {{"members", members}};
}

std::vector<std::vector<double>> ModelPool::forecasts(const TimeSeries& history, std::size_t horizon) const {
    std::vector<std::vector<double>> out;
    for (const auto& m : members_) {
        auto f = m.model->predict_series(history, horizon);
        if (f.size() != horizon) throw NumericError("member '" + m.name + "' returned the wrong horizon");
        out.push_back(std::move(f));
    }
    return out;
}

std::vector<std::string> ModelProfile::ranking(const std::string& dataset) const {
    std::vector<const ProfileRow*> rs;
    for (const auto& r : rows)
        if (r.dataset == dataset) rs.push_back(&r);
    std::stable_sort(rs.begin(), rs.end(), [](const ProfileRow* a, const ProfileRow* b) { return a->fa > b->fa; });
    std::vector<std::string> out;
    for (const auto* r : rs) out.push_back(r->member);
    return out;
}

nlohmann::json ModelProfile::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows)
        arr.push_back({{"member", r.member},
                       {"dataset", r.dataset},
                       {"fa", r.fa},
                       {"wmape", r.wmape},
                       {"mape", r.mape},
                       {"mean_confidence", r.mean_confidence}});
    return {{"rows", arr}, {"warnings", warnings}};
}

ModelProfile profile(const ModelPool& pool, const DatasetMap& datasets, std::size_t horizon, std::size_t n_origins) {
    BenchmarkOptions bo;
    bo.horizon = horizon;
    bo.n_origins = n_origins;
    bo.with_confidence = true;
    const auto named = pool.named();
    const MetricReport rep = rolling_benchmark(named, datasets, bo);
    ModelProfile prof;
    prof.warnings = rep.warnings;
    for (const auto& r : rep.rows)
        prof.rows.push_back({r.model, r.dataset, r.fa, r.wmape, r.mape, r.mean_confidence.value_or(0.0)});
    return prof;
}

// ---------------------------------------------------------------------------
// Combiners

std::vector<double> fuse_average(std::span<const std::vector<double>> forecasts) {
    if (forecasts.empty()) throw UsageError("fuse_average: no forecasts");
    const std::size_t h = forecasts[0].size();
    std::vector<double> out(h, 0.0);
    for (const auto& f : forecasts) {
        if (f.size() != h) throw UsageError("fuse_average: forecast lengths differ");
        for (std::size_t i = 0; i < h; ++i) out[i] += f[i];
    }
    for (double& v : out) v /= static_cast<double>(forecasts.size());
    return out;
}

std::vector<double> LinearFusion::apply(std::span<const std::vector<double>> forecasts) const {
    if (forecasts.size() != weights.size()) throw UsageError("linear fusion: member count differs from weights");
    const std::size_t h = forecasts.empty() ? 0 : forecasts[0].size();
    std::vector<double> out(h, intercept);
    for (std::size_t k = 0; k < forecasts.size(); ++k) {
        if (forecasts[k].size() != h) throw UsageError("linear fusion: forecast lengths differ");
        for (std::size_t i = 0; i < h; ++i) out[i] += weights[k] * forecasts[k][i];
    }
    return out;
}

nlohmann::json LinearFusion::to_json() const {
    return {{"weights", weights}, {"intercept", intercept}, {"ridge_used", ridge_used}};
}

LinearFusion LinearFusion::from_json(const nlohmann::json& j) {
    try {
        LinearFusion f;
        f.weights = j.at("weights").get<std::vector<double>>();
        f.intercept = j.at("intercept").get<double>();
        f.ridge_used = j.value("ridge_used", false);
        return f;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("linear fusion: ") + e.what());
    }
}

LinearFusion fit_linear_fusion(std::span<const std::vector<double>> rows, std::span<const double> truth) {
    if (rows.empty()) throw UsageError("fit_linear_fusion: no rows");
    if (rows.size() != truth.size()) throw UsageError("fit_linear_fusion: rows and truth differ in length");
    const std::size_t k = rows[0].size();
    if (k == 0) throw UsageError("fit_linear_fusion: no members");
    if (rows.size() < k + 1) throw UsageError("fit_linear_fusion: need at least K + 1 rows");
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(k + 1));
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != k) throw UsageError("fit_linear_fusion: ragged rows");
        for (std::size_t c = 0; c < k; ++c) x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = 1.0;
        y(static_cast<Eigen::Index>(r)) = truth[r];
    }
    LinearFusion out;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    qr.setThreshold(1e-10);
    Eigen::VectorXd theta;
    if (qr.rank() == x.cols()) {
        theta = qr.solve(y);
    } else {
        Eigen::MatrixXd a = x.transpose() * x;
        a.diagonal().array() += kRidgeLambda;
        theta = a.ldlt().solve(x.transpose() * y);
        out.ridge_used = true;
    }
    out.weights.resize(k);
    for (std::size_t c = 0; c < k; ++c) out.weights[c] = theta(static_cast<Eigen::Index>(c));
    out.intercept = theta(static_cast<Eigen::Index>(k));
    return out;
}

// ---------------------------------------------------------------------------
// Statistical embedder

std::vector<double> statistical_features(const TimeSeries& series) {
    const auto all = series.values();
    const std::size_t n = std::min<std::size_t>(all.size(), 256);
    const auto x = all.subspan(all.size() - n);
    std::vector<double> f(kStatFeatures, 0.0);
    double abs_mean = 0.0, mean = 0.0;
    for (double v : x) {
        abs_mean += std::abs(v);
        mean += v;
    }
    abs_mean /= static_cast<double>(n);
    mean /= static_cast<double>(n);
    if (!(abs_mean > 0.0)) return f;
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    f[0] = mean / abs_mean;
    f[1] = std::sqrt(var / static_cast<double>(n)) / abs_mean;
    if (var > 0.0 && n > 1) {
        double ac = 0.0;
        for (std::size_t t = 1; t < n; ++t) ac += (x[t] - mean) * (x[t - 1] - mean);
        f[2] = ac / var;
    }
    // Linear trend by least squares on t = 0..n-1.
    const double tm = 0.5 * static_cast<double>(n - 1);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        const double dt = static_cast<double>(t) - tm;
        sxy += dt * (x[t] - mean);
        sxx += dt * dt;
    }
    const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
    f[3] = slope * static_cast<double>(n) / abs_mean;
    std::vector<double> r(n);
    double rvar = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        r[t] = x[t] - mean - slope * (static_cast<double>(t) - tm);
        rvar += r[t] * r[t];
    }
    const auto p = static_cast<std::size_t>(std::max(series.freq().steps_per_cycle, 1));
    if (p >= 2 && n >= 2 * p && rvar > 0.0) {
        std::vector<double> phase(p, 0.0);
        std::vector<std::size_t> cnt(p, 0);
        for (std::size_t t = 0; t < n; ++t) {
            phase[t % p] += r[t];
            ++cnt[t % p];
        }
        double svar = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            const double s = phase[t % p] / static_cast<double>(cnt[t % p]);
            svar += s * s;
        }
        f[4] = std::clamp(svar / rvar, 0.0, 1.0);
    }
    if (rvar > 0.0 && n >= 4) {
        const std::size_t kmax = n / 2;
        std::vector<double> power(kmax, 0.0);
        double total = 0.0;
        for (std::size_t k = 1; k <= kmax; ++k) {
            std::complex<double> acc(0.0, 0.0);
            for (std::size_t t = 0; t < n; ++t) {
                const double ang = -2.0 * std::numbers::pi * static_cast<double>(k * t % n) / static_cast<double>(n);
                acc += r[t] * std::complex<double>(std::cos(ang), std::sin(ang));
            }
            power[k - 1] = std::norm(acc);
            total += power[k - 1];
        }
        if (total > 0.0 && kmax > 1) {
            double h = 0.0;
            for (double pw : power)
                if (pw > 0.0) h -= (pw / total) * std::log(pw / total);
            f[5] = h / std::log(static_cast<double>(kmax));
        }
    }
    return f;
}

Embedder statistical_embedder() {
    return [](const TimeSeries& s) { return statistical_features(s); };
}

// ---------------------------------------------------------------------------
// Router

RouterParams RouterParams::zeros(std::size_t in_dim, std::size_t hidden, std::size_t members) {
    RouterParams r;
    r.in_dim = in_dim;
    r.hidden = hidden;
    r.members = members;
    r.feature_mean.assign(in_dim, 0.0);
    r.feature_scale.assign(in_dim, 1.0);
    r.w1.assign(hidden * in_dim, 0.0);
    r.b1.assign(hidden, 0.0);
    r.w2.assign(members * hidden, 0.0);
    r.b2.assign(members, 0.0);
    return r;
}

nlohmann::json RouterParams::to_json() const {
    return {{"in_dim", in_dim},       {"hidden", hidden}, {"members", members}, {"feature_mean", feature_mean},
            {"feature_scale", feature_scale}, {"w1", w1},         {"b1", b1},           {"w2", w2},
            {"b2", b2}};
}

RouterParams RouterParams::from_json(const nlohmann::json& j) {
    try {
        RouterParams r;
        r.in_dim = j.at("in_dim").get<std::size_t>();
        r.hidden = j.at("hidden").get<std::size_t>();
        r.members = j.at("members").get<std::size_t>();
        r.feature_mean = j.at("feature_mean").get<std::vector<double>>();
        r.feature_scale = j.at("feature_scale").get<std::vector<double>>();
        r.w1 = j.at("w1").get<std::vector<double>>();
        r.b1 = j.at("b1").get<std::vector<double>>();
        r.w2 = j.at("w2").get<std::vector<double>>();
        r.b2 = j.at("b2").get<std::vector<double>>();
        if (r.feature_mean.size() != r.in_dim || r.feature_scale.size() != r.in_dim ||
            r.w1.size() != r.hidden * r.in_dim || r.b1.size() != r.hidden || r.w2.size() != r.members * r.hidden ||
            r.b2.size() != r.members)
            throw DataError("router: array sizes do not match dimensions");
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("router: ") + e.what());
    }
}

namespace {

struct RouterPass {
    std::vector<double> z, a, w;
};

RouterPass router_pass(const RouterParams& r, std::span<const double> features) {
    if (features.size() != r.in_dim) throw UsageError("router: feature dimension mismatch");
    RouterPass p;
    p.z.resize(r.in_dim);
    for (std::size_t i = 0; i < r.in_dim; ++i) p.z[i] = (features[i] - r.feature_mean[i]) / r.feature_scale[i];
    p.a.resize(r.hidden);
    for (std::size_t h = 0; h < r.hidden; ++h) {
        double s = r.b1[h];
        for (std::size_t i = 0; i < r.in_dim; ++i) s += r.w1[h * r.in_dim + i] * p.z[i];
        p.a[h] = std::tanh(s);
    }
    p.w.resize(r.members);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < r.members; ++k) {
        double s = r.b2[k];
        for (std::size_t h = 0; h < r.hidden; ++h) s += r.w2[k * r.hidden + h] * p.a[h];
        p.w[k] = s;
        mx = std::max(mx, s);
    }
    double sum = 0.0;
    for (double& v : p.w) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (double& v : p.w) v /= sum;
    return p;
}

std::size_t best_member(const RoutingExample& ex) {
    std::size_t best = 0;
    double best_err = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < ex.forecasts.size(); ++k) {
        double e = 0.0;
        for (std::size_t h = 0; h < ex.truth.size(); ++h) e += std::abs(ex.forecasts[k][h] - ex.truth[h]);
        if (e < best_err) {
            best_err = e;
            best = k;
        }
    }
    return best;
}

}  // namespace

std::vector<double> router_weights(const RouterParams& router, std::span<const double> features) {
    return router_pass(router, features).w;
}

RouterMode parse_router_mode(std::string_view text) {
    if (text == "best_member_ce") return RouterMode::best_member_ce;
    if (text == "end_to_end") return RouterMode::end_to_end;
    throw UsageError("unknown router mode '" + std::string(text) + "'");
}

std::vector<RoutingExample> routing_examples(const ModelPool& pool, const Embedder& embed, const DatasetMap& datasets,
                                             std::size_t horizon, std::size_t n_origins, std::size_t min_context) {
    if (horizon == 0 || n_origins == 0) throw UsageError("routing_examples: horizon and origins must be >= 1");
    std::vector<RoutingExample> out;
    const std::size_t need = std::max<std::size_t>(min_context, 1) + horizon + n_origins - 1;
    for (const auto& [name, series] : datasets) {
        for (const auto& s : series) {
            if (s.size() < need) continue;
            const auto v = s.values();
            for (std::size_t j = 0; j < n_origins; ++j) {
                const std::size_t cut = s.size() - horizon - j;
                const TimeSeries prefix = s.derive(s.id(), std::vector<double>(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(cut)));
                RoutingExample ex;
                ex.features = embed(prefix);
                ex.forecasts = pool.forecasts(prefix, horizon);
                ex.truth.assign(v.begin() + static_cast<std::ptrdiff_t>(cut), v.begin() + static_cast<std::ptrdiff_t>(cut + horizon));
                out.push_back(std::move(ex));
            }
        }
    }
    return out;
}

double router_loss(const RouterParams& r, std::span<const RoutingExample> examples, RouterMode mode,
                   std::vector<double>* grad) {
    if (examples.empty()) throw UsageError("router: no training examples");
    const std::size_t n1 = r.w1.size(), n2 = r.b1.size(), n3 = r.w2.size();
    if (grad) grad->assign(n1 + n2 + n3 + r.b2.size(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(examples.size());
    double loss = 0.0;
    std::vector<double> dlogit(r.members), da(r.hidden);
    for (const auto& ex : examples) {
        if (ex.forecasts.size() != r.members) throw UsageError("router: member count mismatch");
        const RouterPass p = router_pass(r, ex.features);
        if (mode == RouterMode::best_member_ce) {
            const std::size_t target = best_member(ex);
            loss -= inv_n * std::log(std::max(p.w[target], 1e-300));
            for (std::size_t k = 0; k < r.members; ++k) dlogit[k] = inv_n * (p.w[k] - (k == target ? 1.0 : 0.0));
        } else {
            const std::size_t hz = ex.truth.size();
            double scale = 0.0;
            for (double y : ex.truth) scale += std::abs(y);
            scale = scale / static_cast<double>(hz) + 1e-8;
            const double norm = 1.0 / (static_cast<double>(hz) * scale * scale);
            std::vector<double> dw(r.members, 0.0);
            for (std::size_t h = 0; h < hz; ++h) {
                double yhat = 0.0;
                for (std::size_t k = 0; k < r.members; ++k) yhat += p.w[k] * ex.forecasts[k][h];
                const double e = yhat - ex.truth[h];
                loss += inv_n * norm * e * e;
                for (std::size_t k = 0; k < r.members; ++k) dw[k] += inv_n * norm * 2.0 * e * ex.forecasts[k][h];
            }
            double wdw = 0.0;
            for (std::size_t k = 0; k < r.members; ++k) wdw += p.w[k] * dw[k];
            for (std::size_t k = 0; k < r.members; ++k) dlogit[k] = p.w[k] * (dw[k] - wdw);
        }
        if (!grad) continue;
        auto& g = *grad;
        std::fill(da.begin(), da.end(), 0.0);
        for (std::size_t k = 0; k < r.members; ++k) {
            for (std::size_t h = 0; h < r.hidden; ++h) {
                g[n1 + n2 + k * r.hidden + h] += dlogit[k] * p.a[h];
                da[h] += r.w2[k * r.hidden + h] * dlogit[k];
            }
            g[n1 + n2 + n3 + k] += dlogit[k];
        }
        for (std::size_t h = 0; h < r.hidden; ++h) {
            const double dpre = da[h] * (1.0 - p.a[h] * p.a[h]);
            for (std::size_t i = 0; i < r.in_dim; ++i) g[h * r.in_dim + i] += dpre * p.z[i];
            g[n1 + h] += dpre;
        }
    }
    return loss;
}

RouterParams train_router(std::span<const RoutingExample> examples, const RouterTrainOptions& options,
                          std::uint64_t seed) {
    if (examples.empty()) throw UsageError("train_router: no training windows");
    const std::size_t k = examples[0].forecasts.size();
    if (k < 2) throw UsageError("train_router: need at least 2 pool members");
    const std::size_t f = examples[0].features.size();
    if (f == 0) throw UsageError("train_router: empty feature vectors");
    RouterParams r = RouterParams::zeros(f, options.hidden, k);
    for (const auto& ex : examples)
        for (std::size_t i = 0; i < f; ++i) r.feature_mean[i] += ex.features.at(i) / static_cast<double>(examples.size());
    for (std::size_t i = 0; i < f; ++i) {
        double v = 0.0;
        for (const auto& ex : examples) v += std::pow(ex.features[i] - r.feature_mean[i], 2);
        const double sd = std::sqrt(v / static_cast<double>(examples.size()));
        r.feature_scale[i] = sd > 1e-8 ? sd : 1.0;
    }
    Rng rng = make_rng(derive_seed(seed, "router.init"));
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(f)));
    for (double& w : r.w1) w = normal(rng);

    std::vector<double*> slots;
    for (auto* arr : {&r.w1, &r.b1, &r.w2, &r.b2})
        for (double& v : *arr) slots.push_back(&v);
    std::vector<double> m(slots.size(), 0.0), v(slots.size(), 0.0), g;
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    for (std::size_t step = 0; step < options.epochs; ++step) {
        const double loss = router_loss(r, examples, options.mode, &g);
        if (!std::isfinite(loss)) throw NumericError("train_router: non-finite loss");
        const double t = static_cast<double>(step + 1);
        const double c1 = 1.0 - std::pow(b1, t), c2 = 1.0 - std::pow(b2, t);
        for (std::size_t i = 0; i < slots.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            *slots[i] -= options.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }
    return r;
}

RoutedForecast route_fuse(const RouterParams& router, const Embedder& embed, const TimeSeries& series,
                          const ModelPool& pool, std::size_t horizon) {
    if (pool.size() != router.members) throw UsageError("route_fuse: pool size differs from router");
    RoutedForecast out;
    out.weights = router_weights(router, embed(series));
    const auto fs = pool.forecasts(series, horizon);
    out.forecast.assign(horizon, 0.0);
    for (std::size_t k = 0; k < fs.size(); ++k)
        for (std::size_t h = 0; h < horizon; ++h) out.forecast[h] += out.weights[k] * fs[k][h];
    return out;
}

std::string_view to_string(RouterMode mode) {
    return mode == RouterMode::best_member_ce ? "best_member_ce" : "end_to_end";
}

// ---------------------------------------------------------------------------
// Fused forecasters

namespace {

TimeSeries wrap_values(std::span<const double> history, const Frequency& freq) {
    return TimeSeries("history", freq, parse_timestamp("2020-01-01"), std::vector<double>(history.begin(), history.end()));
}

}  // namespace

FusionMode parse_fusion_mode(std::string_view text) {
    if (text == "average") return FusionMode::average;
    if (text == "linear") return FusionMode::linear;
    if (text == "router") return FusionMode::router;
    throw UsageError("unknown fusion mode '" + std::string(text) + "'");
}

std::string_view to_string(FusionMode mode) {
    switch (mode) {
        case FusionMode::average: return "average";
        case FusionMode::linear: return "linear";
        case FusionMode::router: return "router";
    }
    return "average";
}

FusedForecaster::FusedForecaster(std::shared_ptr<const ModelPool> pool, FusionMode mode, Frequency freq)
    : pool_(std::move(pool)), mode_(mode), freq_(freq) {
    if (!pool_ || pool_->size() == 0) throw UsageError("fusion: empty pool");
}

void FusedForecaster::set_linear(LinearFusion linear) {
    if (linear.weights.size() != pool_->size()) throw UsageError("fusion: linear weights do not match the pool");
    linear_ = std::move(linear);
}

void FusedForecaster::set_router(RouterParams router, RouterMode trained_with) {
    if (router.members != pool_->size()) throw UsageError("fusion: router does not match the pool");
    router_ = std::move(router);
    router_mode_ = trained_with;
}

std::vector<double> FusedForecaster::weights(const TimeSeries& history) const {
    switch (mode_) {
        case FusionMode::average: return std::vector<double>(pool_->size(), 1.0 / static_cast<double>(pool_->size()));
        case FusionMode::linear:
            if (!linear_) throw UsageError("fusion: linear mode without fitted weights");
            return linear_->weights;
        case FusionMode::router:
            if (!router_) throw UsageError("fusion: router mode without a trained router");
            return router_weights(*router_, embed_(history));
    }
    return {};
}

std::vector<double> FusedForecaster::predict_series(const TimeSeries& history, std::size_t horizon) const {
    const auto fs = pool_->forecasts(history, horizon);
    switch (mode_) {
        case FusionMode::average: return fuse_average(fs);
        case FusionMode::linear:
            if (!linear_) throw UsageError("fusion: linear mode without fitted weights");
            return linear_->apply(fs);
        case FusionMode::router: {
            const auto w = weights(history);
            std::vector<double> out(horizon, 0.0);
            for (std::size_t k = 0; k < fs.size(); ++k)
                for (std::size_t h = 0; h < horizon; ++h) out[h] += w[k] * fs[k][h];
            return out;
        }
    }
    return {};
}

std::vector<double> FusedForecaster::predict(std::span<const double> history, std::size_t horizon) const {
    return predict_series(wrap_values(history, freq_), horizon);
}

nlohmann::json FusedForecaster::describe() const {
    return {{"kind", "fused"}, {"mode", std::string(to_string(mode_))}};
}

nlohmann::json FusedForecaster::to_json() const {
    nlohmann::json j{{"mode", std::string(to_string(mode_))}, {"embedder", "statistical"}, {"pool", pool_->to_json()}};
    if (linear_) j["linear"] = linear_->to_json();
    if (router_) {
        j["router"] = router_->to_json();
        j["router_mode"] = std::string(to_string(router_mode_));
    }
    return j;
}

FusedForecaster FusedForecaster::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    try {
        for (const auto& [k, v] : j.items())
            if (k != "mode" && k != "embedder" && k != "pool" && k != "linear" && k != "router" && k != "router_mode")
                throw DataError("fusion file: unknown key '" + k + "'");
        if (j.value("embedder", std::string("statistical")) != "statistical")
            throw DataError("fusion file: unsupported embedder");
        auto pool = std::make_shared<const ModelPool>(ModelPool::from_json(j.at("pool"), base_dir));
        FusionMode mode;
        try {
            mode = parse_fusion_mode(j.at("mode").get<std::string>());
        } catch (const UsageError& e) {
            throw DataError(std::string("fusion file: ") + e.what());
        }
        FusedForecaster f(pool, mode);
        if (j.contains("linear")) f.set_linear(LinearFusion::from_json(j.at("linear")));
        if (j.contains("router"))
            f.set_router(RouterParams::from_json(j.at("router")),
                         parse_router_mode(j.value("router_mode", std::string("best_member_ce"))));
        if (mode == FusionMode::linear && !f.linear_) throw DataError("fusion file: linear mode needs 'linear'");
        if (mode == FusionMode::router && !f.router_) throw DataError("fusion file: router mode needs 'router'");
        return f;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("fusion file: ") + e.what());
    }
}

FusedForecaster FusedForecaster::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read fusion file '" + path.string() + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("fusion file '" + path.string() + "': " + e.what());
    }
    return from_json(j, path.parent_path());
}

LinearFusion fit_linear_fusion(std::span<const RoutingExample> examples) {
    std::vector<std::vector<double>> rows;
    std::vector<double> truth;
    for (const auto& ex : examples) {
        for (std::size_t h = 0; h < ex.truth.size(); ++h) {
            std::vector<double> row;
            for (const auto& f : ex.forecasts) row.push_back(f.at(h));
            rows.push_back(std::move(row));
            truth.push_back(ex.truth[h]);
        }
    }
    return fit_linear_fusion(rows, truth);
}

std::vector<double> CascadeForecaster::predict_series(const TimeSeries& history, std::size_t horizon) const {
    return coordinate_infer(s1_, s2_, *large_, history, horizon, cfg_).forecast;
}

std::vector<double> CascadeForecaster::predict(std::span<const double> history, std::size_t horizon) const {
    return predict_series(wrap_values(history, freq_), horizon);
}

nlohmann::json CascadeForecaster::describe() const {
    return {{"kind", "cascade"}, {"s1", s1_.to_json()}, {"s2", s2_.to_json()}, {"config", cfg_.to_json()}};
}

// ---------------------------------------------------------------------------
// Coordination

void CoordinationConfig::validate() const {
    auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (!in_unit(tau1)) throw UsageError("coordination: tau1 must lie in [0, 1]");
    if (tau2 && !in_unit(*tau2)) throw UsageError("coordination: tau2 must lie in [0, 1]");
    if (!(lambda >= 0.0)) throw UsageError("coordination: lambda must be >= 0");
    if (!(learning_rate >= 0.0)) throw UsageError("coordination: learning_rate must be >= 0");
}

nlohmann::json CoordinationConfig::to_json() const {
    return {{"tau1", tau1}, {"tau2", large_threshold()}, {"lambda", lambda}, {"steps", steps}, {"learning_rate", learning_rate}};
}

std::string_view to_string(Route r) {
    switch (r) {
        case Route::s1: return "s1";
        case Route::s2: return "s2";
        case Route::large: return "large";
    }
    return "s1";
}

ArPathJacobian ar_path_jacobian(const LinearARModel& model, std::span<const double> lags, std::size_t horizon) {
    const auto p = static_cast<std::size_t>(model.order);
    if (model.coefficients.size() != p || p == 0) throw UsageError("AR model is not fitted");
    if (lags.size() < p) throw UsageError("ar_path_jacobian: history shorter than model order");
    std::vector<double> buf(lags.end() - static_cast<std::ptrdiff_t>(p), lags.end());
    std::vector<std::vector<double>> dbuf(p, std::vector<double>(p + 1, 0.0));
    ArPathJacobian out;
    for (std::size_t h = 0; h < horizon; ++h) {
        const std::size_t end = buf.size();
        double v = model.intercept;
        for (std::size_t i = 0; i < p; ++i) v += model.coefficients[i] * buf[end - 1 - i];
        std::vector<double> dv(p + 1, 0.0);
        dv[0] = 1.0;
        for (std::size_t i = 0; i < p; ++i) {
            dv[i + 1] += buf[end - 1 - i];
            const auto& prev = dbuf[end - 1 - i];
            for (std::size_t q = 0; q <= p; ++q) dv[q] += model.coefficients[i] * prev[q];
        }
        out.path.push_back(v);
        out.jacobian.push_back(dv);
        buf.push_back(v);
        dbuf.push_back(std::move(dv));
    }
    return out;
}

CoordinationResult coordinate_train(const LinearARModel& s1, const Forecaster& large,
                                    std::span<const TimeSeries> histories, std::size_t horizon,
                                    const CoordinationConfig& cfg, std::uint64_t seed) {
    (void)seed;
    cfg.validate();
    if (s1.differenced) throw UsageError("coordinate_train: s1 must not be differenced");
    if (horizon == 0) throw UsageError("coordinate_train: horizon must be >= 1");
    CoordinationResult res;
    res.s2 = s1;

    struct Item {
        std::vector<double> lags, target;
    };
    std::vector<Item> easy, challenging;
    for (const auto& hist : histories) {
        const auto v = hist.values();
        const ArSpace sp = to_model_space(s1, v);
        if (baseline_confidence(s1, v, horizon) > cfg.tau1) {
            ++res.easy;
            easy.push_back({sp.series, ar_path_jacobian(s1, sp.series, horizon).path});
            continue;
        }
        ++res.hard;
        if (!(large.confidence_series(hist, horizon) > cfg.large_threshold())) continue;
        ++res.challenging;
        std::vector<double> f = large.predict_series(hist, horizon);
        if (s1.normalized)
            for (double& x : f) x = (x - sp.mean) / sp.scale;
        challenging.push_back({sp.series, std::move(f)});
    }
    if (challenging.empty()) {
        res.no_challenging = true;
        return res;
    }

    const auto p = static_cast<std::size_t>(s1.order);
    std::vector<double> theta(p + 1), m(p + 1, 0.0), v(p + 1, 0.0);
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    auto unpack = [&](LinearARModel& mdl) {
        mdl.intercept = theta[0];
        for (std::size_t i = 0; i < p; ++i) mdl.coefficients[i] = theta[i + 1];
    };
    theta[0] = s1.intercept;
    for (std::size_t i = 0; i < p; ++i) theta[i + 1] = s1.coefficients[i];
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        LinearARModel cur = s1;
        unpack(cur);
        std::vector<double> g(p + 1, 0.0);
        double loss = 0.0;
        auto accumulate = [&](const std::vector<Item>& items, double weight) {
            if (items.empty() || weight == 0.0) return;
            const double scale = weight / (static_cast<double>(items.size()) * static_cast<double>(horizon));
            for (const auto& it : items) {
                const ArPathJacobian pj = ar_path_jacobian(cur, it.lags, horizon);
                for (std::size_t h = 0; h < horizon; ++h) {
                    const double e = pj.path[h] - it.target[h];
                    loss += scale * e * e;
                    for (std::size_t q = 0; q <= p; ++q) g[q] += scale * 2.0 * e * pj.jacobian[h][q];
                }
            }
        };
        accumulate(easy, 1.0);
        accumulate(challenging, cfg.lambda);
        if (!std::isfinite(loss)) throw NumericError("coordinate_train: non-finite distillation loss");
        res.losses.push_back(loss);
        const double t = static_cast<double>(step + 1);
        const double c1 = 1.0 - std::pow(b1, t), c2 = 1.0 - std::pow(b2, t);
        for (std::size_t q = 0; q <= p; ++q) {
            m[q] = b1 * m[q] + (1.0 - b1) * g[q];
            v[q] = b2 * v[q] + (1.0 - b2) * g[q] * g[q];
            theta[q] -= cfg.learning_rate * (m[q] / c1) / (std::sqrt(v[q] / c2) + eps);
        }
    }
    unpack(res.s2);
    return res;
}

CascadeResult coordinate_infer(const LinearARModel& s1, const LinearARModel& s2, const Forecaster& large,
                               const TimeSeries& series, std::size_t horizon, const CoordinationConfig& cfg) {
    cfg.validate();
    CascadeResult out;
    const auto v = series.values();
    out.confidence_s1 = baseline_confidence(s1, v, horizon);
    if (out.confidence_s1 > cfg.tau1) {
        out.route = Route::s1;
        out.forecast = ar_predict(s1, v, horizon);
        return out;
    }
    out.confidence_s2 = baseline_confidence(s2, v, horizon);
    if (out.confidence_s2 > cfg.tau1) {
        out.route = Route::s2;
        out.forecast = ar_predict(s2, v, horizon);
        return out;
    }
    out.route = Route::large;
    out.forecast = large.predict_series(series, horizon);
    return out;
}

}  // namespace tidecast
