#include <cmath>
#include <random>

#include "tidecast/error.hpp"
#include "tidecast/rng.hpp"
#include "tidecast/tsfm.hpp"

namespace tidecast::tsfm {

TrainSample make_sample(const TimeSeries& series, std::size_t end, int patch_len, int context_patches) {
    const auto pl = static_cast<std::size_t>(patch_len);
    if (end > series.size() || end < pl + 1) throw UsageError("make_sample: need at least patch_len + 1 points");
    const std::size_t ctx_end = end - pl;
    Tokenized tk = tokenize_prefix(series, ctx_end, patch_len, context_patches);
    TrainSample s;
    s.freq = series.freq();
    const std::size_t n = tk.tokens.size();
    s.targets.assign(n * pl, 0.0);
    s.target_mask.assign(n * pl, 0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        for (std::size_t j = 0; j < pl; ++j) {
            s.targets[i * pl + j] = tk.tokens[i + 1].values[j];
            s.target_mask[i * pl + j] = tk.tokens[i + 1].mask[j];
        }
    }
    for (std::size_t j = 0; j < pl; ++j) {
        s.targets[(n - 1) * pl + j] = (series[ctx_end + j] - tk.stats.mean) / tk.stats.std;
        s.target_mask[(n - 1) * pl + j] = 1;
    }
    s.tokens = std::move(tk.tokens);
    return s;
}

TrainResult train(const ModelConfig& config, const DatasetMap& datasets, const TrainOptions& options,
                  std::uint64_t seed) {
    return train(init_params(config, seed), datasets, options, seed);
}

TrainResult train(Params init, const DatasetMap& datasets, const TrainOptions& options, std::uint64_t seed) {
    validate(init);
    const ModelConfig cfg = init.config;
    if (datasets.empty()) throw UsageError("train: no datasets");
    if (options.batch_size == 0 && !options.full_batch) throw UsageError("train: batch_size must be >= 1");
    if (options.dro && options.dro_every == 0) throw UsageError("train: dro_every must be >= 1");

    auto patch_of = [&](const TimeSeries& s) { return patch_length_for(cfg, s.freq()); };

    DatasetMap eligible;
    std::vector<std::string> keys;
    for (const auto& [k, series] : datasets) {
        keys.push_back(k);
        std::vector<TimeSeries> ok;
        for (const auto& s : series)
            if (s.size() >= static_cast<std::size_t>(patch_of(s)) + 1) ok.push_back(s);
        if (!ok.empty()) eligible.emplace(k, std::move(ok));
    }
    if (eligible.empty()) throw DataError("train: no series is longer than one patch");

    TrainResult res;
    GroupWeights w = GroupWeights::uniform(keys, options.eta, options.smoothing);
    const GroupWeights flat = w;
    std::map<std::string, std::vector<TrainSample>> eval;
    if (options.dro) {
        ReferenceOptions ropt;
        ropt.kind = ReferenceModel::ar;
        ropt.loss = ReferenceLoss::gaussian_nll;
        ropt.normalized = true;
        for (const auto& [k, series] : datasets) {
            res.reference[k] = fit_reference(series, ropt).loss;
            auto it = eligible.find(k);
            if (it == eligible.end()) continue;
            for (std::size_t i = 0; i < it->second.size() && i < options.eval_series_per_dataset; ++i) {
                const auto& s = it->second[i];
                eval[k].push_back(make_sample(s, s.size(), patch_of(s), cfg.context_patches));
            }
        }
        res.weight_trajectory.push_back(w.weights);
    }

    std::vector<TrainSample> all;
    if (options.full_batch) {
        for (const auto& [k, series] : eligible)
            for (const auto& s : series) {
                const auto pl = static_cast<std::size_t>(patch_of(s));
                for (std::size_t end = pl + 1; end <= s.size(); ++end) {
                    all.push_back(make_sample(s, end, static_cast<int>(pl), cfg.context_patches));
                    all.back().dataset = k;
                }
            }
    }

    Params params = std::move(init);
    Arrays grad = zeros_like(params.arrays);
    Arrays m1 = zeros_like(params.arrays);
    Arrays m2 = zeros_like(params.arrays);
    Rng window_rng = make_rng(derive_seed(seed, "tsfm.windows"));
    const std::uint64_t batch_seed = derive_seed(seed, "tsfm.batches");

    for (std::size_t step = 0; step < options.steps; ++step) {
        std::vector<TrainSample> batch;
        if (options.full_batch) {
            batch = all;
        } else {
            const bool by_weight = options.dro && !options.loss_multiplier;
            const auto items = sample_batch(eligible, by_weight ? w : flat, options.batch_size, 0,
                                            derive_seed(batch_seed, step));
            for (const auto& item : items) {
                const auto pl = static_cast<std::size_t>(patch_of(item.window));
                std::uniform_int_distribution<std::size_t> pick(pl + 1, item.window.size());
                batch.push_back(make_sample(item.window, pick(window_rng), static_cast<int>(pl), cfg.context_patches));
                batch.back().dataset = item.dataset;
            }
        }
        if (options.dro && options.loss_multiplier)
            for (auto& s : batch) s.weight = w.weights.at(s.dataset) * static_cast<double>(keys.size());

        double loss = 0.0;
        try {
            loss = batch_loss_grad(params, batch, grad);
        } catch (const NumericError&) {
            res.diverged = true;
            break;
        }
        bool finite = std::isfinite(loss);
        for (const auto& [name, a] : grad) {
            for (double g : a.values)
                if (!std::isfinite(g)) finite = false;
            if (!finite) break;
        }
        if (!finite) {
            res.diverged = true;
            break;
        }
        res.losses.push_back(loss);

        const Arrays last_good = params.arrays;
        const double t = static_cast<double>(step + 1);
        const double c1 = 1.0 - std::pow(cfg.beta1, t);
        const double c2 = 1.0 - std::pow(cfg.beta2, t);
        for (auto& [name, a] : params.arrays) {
            auto& g = grad.at(name).values;
            auto& m = m1.at(name).values;
            auto& v = m2.at(name).values;
            for (std::size_t i = 0; i < a.values.size(); ++i) {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                a.values[i] -= cfg.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.epsilon);
            }
        }
        bool updated_ok = true;
        for (const auto& [name, a] : params.arrays)
            for (double x : a.values)
                if (!std::isfinite(x)) updated_ok = false;
        if (!updated_ok) {
            params.arrays = last_good;
            res.losses.pop_back();
            res.diverged = true;
            break;
        }
        ++res.steps_completed;

        if (options.dro && (step + 1) % options.dro_every == 0) {
            LossMap cur;
            for (const auto& k : keys) {
                auto it = eval.find(k);
                cur[k] = it == eval.end() ? res.reference.at(k) : batch_loss(params, it->second);
            }
            w = update_weights(w, excess_loss(cur, res.reference));
            res.weight_trajectory.push_back(w.weights);
        }
    }
    res.params = std::move(params);
    return res;
}

}  // namespace tidecast::tsfm
