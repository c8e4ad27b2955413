#include "tidecast/dromix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "tidecast/error.hpp"
#include "tidecast/rng.hpp"

namespace tidecast {

DatasetMap to_dataset_map(const std::vector<Dataset>& datasets) {
    DatasetMap out;
    for (const auto& d : datasets) {
        if (out.count(d.id)) throw DataError("duplicate dataset id '" + d.id + "'");
        out.emplace(d.id, d.series);
    }
    return out;
}

GroupWeights GroupWeights::uniform(const std::vector<std::string>& keys, double eta, double smoothing) {
    if (keys.empty()) throw UsageError("group weights need at least one dataset");
    GroupWeights w;
    w.eta = eta;
    w.smoothing = smoothing;
    for (const auto& k : keys) w.weights[k] = 1.0 / static_cast<double>(keys.size());
    return w;
}

void GroupWeights::check() const {
    if (weights.empty()) throw NumericError("group weights are empty");
    double sum = 0.0;
    for (const auto& [k, v] : weights) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw NumericError("weight of '" + k + "' is not a nonnegative number");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw NumericError("group weights do not sum to 1");
}

nlohmann::json GroupWeights::to_json() const {
    return {{"weights", weights}, {"eta", eta}, {"smoothing", smoothing}};
}

std::string_view to_string(ReferenceModel kind) {
    switch (kind) {
        case ReferenceModel::naive: return "naive";
        case ReferenceModel::seasonal_naive: return "seasonal_naive";
        case ReferenceModel::ar: return "ar";
    }
    return "ar";
}

ReferenceModel parse_reference_model(std::string_view text) {
    if (text == "naive") return ReferenceModel::naive;
    if (text == "seasonal_naive") return ReferenceModel::seasonal_naive;
    if (text == "ar") return ReferenceModel::ar;
    throw UsageError("unknown reference model '" + std::string(text) + "'");
}

namespace {

double point_loss(ReferenceLoss kind, double err, double var) {
    if (kind == ReferenceLoss::squared_error) return err * err;
    return 0.5 * std::log(2.0 * std::numbers::pi * var) + err * err / (2.0 * var);
}

struct Split {
    std::vector<double> z;
    std::size_t train = 0;
};

Split split_series(const TimeSeries& s, double holdout_fraction, bool normalized) {
    Split sp;
    const std::size_t n = s.size();
    const auto hold = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(holdout_fraction * static_cast<double>(n))));
    if (hold >= n) return sp;
    sp.train = n - hold;
    const auto vals = s.values();
    if (normalized) {
        const NormStats st = norm_stats(vals.first(sp.train));
        sp.z = normalize(vals, st);
    } else {
        sp.z.assign(vals.begin(), vals.end());
    }
    return sp;
}

double ar_one_step(const LinearARModel& m, const std::vector<double>& z, std::size_t t) {
    double v = m.intercept;
    for (int i = 0; i < m.order; ++i) v += m.coefficients[static_cast<std::size_t>(i)] * z[t - 1 - static_cast<std::size_t>(i)];
    return v;
}

}  // namespace

ReferenceResult fit_reference(std::span<const TimeSeries> dataset, const ReferenceOptions& options) {
    if (dataset.empty()) throw UsageError("fit_reference: empty dataset");
    if (!(options.holdout_fraction > 0.0 && options.holdout_fraction < 1.0))
        throw UsageError("fit_reference: holdout fraction must lie in (0, 1)");
    ReferenceResult res;
    res.used = options.kind;
    double total = 0.0;
    std::size_t fallbacks = 0, usable = 0;
    for (const auto& s : dataset) {
        const Split sp = split_series(s, options.holdout_fraction, options.normalized);
        if (sp.train < 2) continue;
        ++usable;
        const auto& z = sp.z;
        ReferenceModel kind = options.kind;
        LinearARModel ar;
        const int period = s.freq().steps_per_cycle;
        if (kind == ReferenceModel::seasonal_naive && sp.train < static_cast<std::size_t>(period) + 1) kind = ReferenceModel::naive;
        if (kind == ReferenceModel::ar) {
            int p = options.order > 0 ? options.order : period;
            p = std::min<int>(p, static_cast<int>((sp.train - 1) / 2));
            bool ok = p >= 1;
            if (ok) {
                ar = ar_fit(std::span<const double>(z).first(sp.train), p);
                ok = !ar.ridge_used;
            }
            if (!ok) {
                kind = ReferenceModel::naive;
                ++fallbacks;
            }
        }
        auto predict = [&](std::size_t t) {
            switch (kind) {
                case ReferenceModel::naive: return z[t - 1];
                case ReferenceModel::seasonal_naive: return z[t - static_cast<std::size_t>(period)];
                case ReferenceModel::ar: return ar_one_step(ar, z, t);
            }
            return z[t - 1];
        };
        std::size_t first = 1;
        if (kind == ReferenceModel::seasonal_naive) first = static_cast<std::size_t>(period);
        if (kind == ReferenceModel::ar) first = static_cast<std::size_t>(ar.order);
        double var = 0.0;
        std::size_t nv = 0;
        for (std::size_t t = first; t < sp.train; ++t, ++nv) {
            const double e = z[t] - predict(t);
            var += e * e;
        }
        var = std::max(nv > 0 ? var / static_cast<double>(nv) : 0.0, 1e-8);
        for (std::size_t t = sp.train; t < z.size(); ++t) {
            total += point_loss(options.loss, z[t] - predict(t), var);
            ++res.points;
        }
    }
    if (res.points == 0) throw DataError("fit_reference: no series long enough to hold out data");
    res.loss = total / static_cast<double>(res.points);
    res.fell_back = fallbacks > 0;
    if (fallbacks == usable && options.kind == ReferenceModel::ar) res.used = ReferenceModel::naive;
    if (!std::isfinite(res.loss)) throw NumericError("fit_reference: non-finite loss");
    return res;
}

LossMap excess_loss(const LossMap& current, const LossMap& reference) {
    if (current.size() != reference.size()) throw UsageError("excess_loss: dataset keys differ");
    LossMap out;
    for (const auto& [k, v] : current) {
        auto it = reference.find(k);
        if (it == reference.end()) throw UsageError("excess_loss: no reference loss for '" + k + "'");
        out[k] = std::max(v - it->second, 0.0);
    }
    return out;
}

GroupWeights update_weights(const GroupWeights& w, const LossMap& excess) {
    w.check();
    if (excess.size() != w.weights.size()) throw UsageError("update_weights: dataset keys differ");
    double emax = -std::numeric_limits<double>::infinity();
    for (const auto& [k, e] : excess) {
        if (!std::isfinite(e)) throw NumericError("update_weights: non-finite excess for '" + k + "'");
        if (!w.weights.count(k)) throw UsageError("update_weights: unknown dataset '" + k + "'");
        emax = std::max(emax, e);
    }
    GroupWeights out = w;
    double sum = 0.0;
    for (auto& [k, v] : out.weights) {
        v *= std::exp(w.eta * (excess.at(k) - emax));
        sum += v;
    }
    const double u = 1.0 / static_cast<double>(out.weights.size());
    double sum2 = 0.0;
    for (auto& [k, v] : out.weights) {
        v = (1.0 - w.smoothing) * (v / sum) + w.smoothing * u;
        sum2 += v;
    }
    for (auto& [k, v] : out.weights) v /= sum2;
    return out;
}

std::vector<BatchItem> sample_batch(const DatasetMap& datasets, const GroupWeights& w, std::size_t batch_size,
                                    std::size_t window_len, std::uint64_t seed) {
    if (batch_size == 0) throw UsageError("sample_batch: batch_size must be >= 1");
    std::vector<std::string> keys;
    std::vector<double> probs;
    std::vector<std::vector<std::size_t>> counts;  // windows per series
    std::vector<std::size_t> totals;
    for (const auto& [k, series] : datasets) {
        auto it = w.weights.find(k);
        if (it == w.weights.end()) throw UsageError("sample_batch: no weight for dataset '" + k + "'");
        std::vector<std::size_t> c;
        std::size_t total = 0;
        for (const auto& s : series) {
            std::size_t nw = 0;
            if (window_len == 0) nw = 1;
            else if (s.size() >= window_len) nw = s.size() - window_len + 1;
            c.push_back(nw);
            total += nw;
        }
        keys.push_back(k);
        probs.push_back(total > 0 ? it->second : 0.0);
        counts.push_back(std::move(c));
        totals.push_back(total);
    }
    double mass = 0.0;
    for (double p : probs) mass += p;
    if (!(mass > 0.0)) throw DataError("sample_batch: no weighted dataset has a window of the requested length");

    Rng rng = make_rng(seed);
    std::discrete_distribution<std::size_t> pick(probs.begin(), probs.end());
    std::vector<BatchItem> out;
    out.reserve(batch_size);
    for (std::size_t b = 0; b < batch_size; ++b) {
        const std::size_t d = pick(rng);
        std::uniform_int_distribution<std::size_t> win(0, totals[d] - 1);
        std::size_t r = win(rng);
        std::size_t si = 0;
        while (r >= counts[d][si]) r -= counts[d][si++];
        const TimeSeries& s = datasets.at(keys[d])[si];
        if (window_len == 0) {
            out.push_back({keys[d], s});
        } else {
            const auto v = s.values().subspan(r, window_len);
            out.push_back({keys[d], s.derive(s.id(), std::vector<double>(v.begin(), v.end()), r)});
        }
    }
    return out;
}

nlohmann::json DroRun::to_json() const {
    nlohmann::json traj = nlohmann::json::array();
    for (const auto& t : trajectory) traj.push_back(t);
    nlohmann::json cur = nlohmann::json::array();
    for (const auto& c : current) cur.push_back(c);
    return {{"weights", final_weights.weights},
            {"eta", final_weights.eta},
            {"smoothing", final_weights.smoothing},
            {"reference_loss", reference},
            {"trajectory", traj},
            {"current_loss", cur},
            {"learner", learner.to_json()}};
}

DroRun run_dro(const DatasetMap& datasets, const DroOptions& options, std::uint64_t seed) {
    if (datasets.empty()) throw UsageError("run_dro: no datasets");
    int p = options.order;
    if (p <= 0) {
        p = std::numeric_limits<int>::max();
        for (const auto& [k, series] : datasets)
            for (const auto& s : series) p = std::min(p, s.freq().steps_per_cycle);
    }
    p = std::max(p, 1);

    DroRun run;
    std::vector<std::string> keys;
    DatasetMap train;
    std::map<std::string, std::vector<Split>> evals;
    ReferenceOptions ropt;
    ropt.kind = ReferenceModel::ar;
    ropt.order = p;
    ropt.normalized = true;
    ropt.holdout_fraction = options.holdout_fraction;
    for (const auto& [k, series] : datasets) {
        keys.push_back(k);
        run.reference[k] = fit_reference(series, ropt).loss;
        auto& tr = train[k];
        auto& ev = evals[k];
        for (const auto& s : series) {
            Split sp = split_series(s, options.holdout_fraction, true);
            if (sp.train < static_cast<std::size_t>(p) + 1) continue;
            tr.push_back(s.derive(s.id(), std::vector<double>(sp.z.begin(), sp.z.begin() + static_cast<std::ptrdiff_t>(sp.train))));
            ev.push_back(std::move(sp));
        }
    }

    LinearARModel& m = run.learner;
    m.order = p;
    m.coefficients.assign(static_cast<std::size_t>(p), 0.0);
    GroupWeights w = GroupWeights::uniform(keys, options.eta, options.smoothing);
    run.trajectory.push_back(w.weights);
    const auto window = static_cast<std::size_t>(p) + 1;
    const GroupWeights flat = GroupWeights::uniform(keys, options.eta, options.smoothing);

    for (std::size_t step = 0; step < options.steps; ++step) {
        const auto batch =
            sample_batch(train, options.loss_multiplier ? flat : w, options.batch_size, window, derive_seed(seed, step));
        std::vector<double> grad(static_cast<std::size_t>(p) + 1, 0.0);
        for (const auto& item : batch) {
            const auto v = item.window.values();
            double pred = m.intercept;
            for (int i = 0; i < p; ++i) pred += m.coefficients[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(p - 1 - i)];
            double scale = 2.0 * (pred - v[static_cast<std::size_t>(p)]) / static_cast<double>(batch.size());
            if (options.loss_multiplier) scale *= w.weights.at(item.dataset) * static_cast<double>(keys.size());
            grad[0] += scale;
            for (int i = 0; i < p; ++i) grad[static_cast<std::size_t>(i) + 1] += scale * v[static_cast<std::size_t>(p - 1 - i)];
        }
        double gn = 0.0;
        for (double g : grad) gn += g * g;
        gn = std::sqrt(gn);
        const double clip = gn > 10.0 ? 10.0 / gn : 1.0;
        m.intercept -= options.learning_rate * clip * grad[0];
        for (int i = 0; i < p; ++i) m.coefficients[static_cast<std::size_t>(i)] -= options.learning_rate * clip * grad[static_cast<std::size_t>(i) + 1];

        LossMap cur;
        for (const auto& k : keys) {
            double total = 0.0;
            std::size_t n = 0;
            for (const auto& sp : evals[k])
                for (std::size_t t = sp.train; t < sp.z.size(); ++t, ++n) {
                    const double e = sp.z[t] - ar_one_step(m, sp.z, t);
                    total += e * e;
                }
            cur[k] = n > 0 ? total / static_cast<double>(n) : run.reference[k];
            if (!std::isfinite(cur[k])) throw NumericError("run_dro: learner diverged");
        }
        w = update_weights(w, excess_loss(cur, run.reference));
        run.current.push_back(std::move(cur));
        run.trajectory.push_back(w.weights);
    }
    double ss = 0.0;
    std::size_t n = 0;
    for (const auto& [k, tr] : train)
        for (const auto& s : tr) {
            std::vector<double> z(s.values().begin(), s.values().end());
            for (std::size_t t = static_cast<std::size_t>(p); t < z.size(); ++t, ++n) {
                const double e = z[t] - ar_one_step(m, z, t);
                ss += e * e;
            }
        }
    m.residual_std = n > 0 ? std::sqrt(ss / static_cast<double>(n)) : 0.0;
    m.normalized = true;
    run.final_weights = w;
    return run;
}

}  // namespace tidecast
