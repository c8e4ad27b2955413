#include "tidecast/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "tidecast/augment.hpp"
#include "tidecast/baselines.hpp"
#include "tidecast/error.hpp"
#include "tidecast/rng.hpp"

namespace tidecast {

namespace {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
    if (!j.is_object()) throw UsageError("config: '" + where + "' must be an object");
    for (const auto& [k, v] : j.items()) {
        bool ok = false;
        for (const char* a : keys) ok = ok || k == a;
        if (!ok) throw UsageError("config: unknown key '" + where + "." + k + "'");
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

json train_to_json(const tsfm::TrainOptions& o) {
    return {{"steps", o.steps},
            {"batch_size", o.batch_size},
            {"full_batch", o.full_batch},
            {"dro", o.dro},
            {"loss_multiplier", o.loss_multiplier},
            {"dro_every", o.dro_every},
            {"eta", o.eta},
            {"smoothing", o.smoothing},
            {"eval_series_per_dataset", o.eval_series_per_dataset}};
}

SyntheticSpec desk_spec(int variant) {
    SyntheticSpec s;
    s.length = 240;
    s.freq = Frequency::of(FreqClass::day, 12);
    SeasonSpec season;
    season.period = 12;
    switch (variant) {
        case 0:
            s.trend.slope_or_rate = 0.05;
            s.trend.intercept = 20.0;
            season.amplitude = 3.0;
            s.noise.sigma = 0.2;
            break;
        case 1:
            s.trend.kind = TrendSpec::Kind::exponential;
            s.trend.slope_or_rate = 0.002;
            s.trend.intercept = 30.0;
            season.amplitude = 0.2;
            s.composition = SyntheticSpec::Composition::multiplicative;
            s.noise.kind = NoiseSpec::Kind::red;
            s.noise.sigma = 0.01;
            s.noise.ar_coefficient = 0.5;
            break;
        default: {
            s.trend.slope_or_rate = 0.02;
            s.trend.intercept = 15.0;
            season.amplitude = 2.0;
            s.noise.sigma = 0.2;
            auto next = std::make_shared<SyntheticSpec>(s);
            next->trend.slope_or_rate = -0.03;
            next->trend.intercept = 25.0;
            SeasonSpec s2 = season;
            s2.amplitude = 4.0;
            next->season = s2;
            Transition tr;
            tr.split_index = 140;
            tr.next = next;
            s.transition = tr;
            break;
        }
    }
    s.season = season;
    return s;
}

}  // namespace

PipelineConfig PipelineConfig::desk_default() {
    PipelineConfig c;
    const char* names[] = {"sim_additive", "sim_multiplicative", "sim_transition"};
    for (int i = 0; i < 3; ++i) c.simulate.push_back({names[i], 4, desk_spec(i)});
    c.augment.mbb = MbbSettings{};
    c.augment.mixup = MixupSettings{};
    c.train.steps = 300;
    c.train.dro = true;
    c.fusion.members = {json{{"name", "seasonal_naive"}, {"kind", "seasonal_naive"}},
                        json{{"name", "ses"}, {"kind", "ses"}, {"alpha", 0.3}},
                        json{{"name", "ar"}, {"kind", "ar"}, {"order", 12}}};
    c.fusion.router.epochs = 300;
    return c;
}

PipelineConfig PipelineConfig::from_json(const json& j) {
    check_keys(j, {"seed", "data", "augment", "model", "train", "fusion", "coordination", "evaluation"}, "config");
    PipelineConfig c = desk_default();
    try {
        read(j, "seed", c.seed);
        if (j.contains("data")) {
            const auto& d = j["data"];
            check_keys(d, {"paths", "simulate"}, "data");
            c.data_paths.clear();
            c.simulate.clear();
            if (d.contains("paths"))
                for (const auto& p : d["paths"]) c.data_paths.emplace_back(p.get<std::string>());
            if (d.contains("simulate")) {
                for (const auto& s : d["simulate"]) {
                    check_keys(s, {"name", "count", "spec"}, "data.simulate[]");
                    SimulatedDataset sd;
                    sd.name = s.at("name").get<std::string>();
                    read(s, "count", sd.count);
                    sd.spec = spec_from_json(s.at("spec"));
                    c.simulate.push_back(std::move(sd));
                }
            }
        }
        if (j.contains("augment")) {
            const auto& a = j["augment"];
            check_keys(a, {"mbb", "mixup", "dba"}, "augment");
            c.augment = {};
            if (a.contains("mbb") && !a["mbb"].is_null()) {
                check_keys(a["mbb"], {"n_variants", "block_len"}, "augment.mbb");
                MbbSettings m;
                read(a["mbb"], "n_variants", m.n_variants);
                read(a["mbb"], "block_len", m.block_len);
                c.augment.mbb = m;
            }
            if (a.contains("mixup") && !a["mixup"].is_null()) {
                check_keys(a["mixup"], {"m", "alpha", "n_variants"}, "augment.mixup");
                MixupSettings m;
                read(a["mixup"], "m", m.m);
                read(a["mixup"], "alpha", m.alpha);
                read(a["mixup"], "n_variants", m.n_variants);
                c.augment.mixup = m;
            }
            if (a.contains("dba") && !a["dba"].is_null()) {
                check_keys(a["dba"], {"k", "per_cluster", "iterations"}, "augment.dba");
                DbaSettings m;
                read(a["dba"], "k", m.k);
                read(a["dba"], "per_cluster", m.per_cluster);
                read(a["dba"], "iterations", m.iterations);
                c.augment.dba = m;
            }
        }
        if (j.contains("model")) c.model = tsfm::ModelConfig::from_json(j["model"]);
        if (j.contains("train")) {
            const auto& t = j["train"];
            check_keys(t,
                       {"steps", "batch_size", "full_batch", "dro", "loss_multiplier", "dro_every", "eta", "smoothing",
                        "eval_series_per_dataset"},
                       "train");
            read(t, "steps", c.train.steps);
            read(t, "batch_size", c.train.batch_size);
            read(t, "full_batch", c.train.full_batch);
            read(t, "dro", c.train.dro);
            read(t, "loss_multiplier", c.train.loss_multiplier);
            read(t, "dro_every", c.train.dro_every);
            read(t, "eta", c.train.eta);
            read(t, "smoothing", c.train.smoothing);
            read(t, "eval_series_per_dataset", c.train.eval_series_per_dataset);
        }
        if (j.contains("fusion")) {
            const auto& f = j["fusion"];
            check_keys(f, {"members", "mode", "router_mode", "hidden", "epochs", "learning_rate", "n_origins"}, "fusion");
            if (f.contains("members")) c.fusion.members = f["members"].get<std::vector<json>>();
            if (f.contains("mode")) c.fusion.mode = parse_fusion_mode(f["mode"].get<std::string>());
            if (f.contains("router_mode")) c.fusion.router.mode = parse_router_mode(f["router_mode"].get<std::string>());
            read(f, "hidden", c.fusion.router.hidden);
            read(f, "epochs", c.fusion.router.epochs);
            read(f, "learning_rate", c.fusion.router.learning_rate);
            read(f, "n_origins", c.fusion.n_origins);
        }
        if (j.contains("coordination")) {
            const auto& k = j["coordination"];
            check_keys(k, {"tau1", "tau2", "lambda", "steps", "learning_rate", "s1_order"}, "coordination");
            read(k, "tau1", c.coordination.config.tau1);
            if (k.contains("tau2") && !k["tau2"].is_null()) c.coordination.config.tau2 = k["tau2"].get<double>();
            read(k, "lambda", c.coordination.config.lambda);
            read(k, "steps", c.coordination.config.steps);
            read(k, "learning_rate", c.coordination.config.learning_rate);
            read(k, "s1_order", c.coordination.s1_order);
        }
        if (j.contains("evaluation")) {
            const auto& e = j["evaluation"];
            check_keys(e, {"horizon", "n_origins", "skills"}, "evaluation");
            read(e, "horizon", c.evaluation.horizon);
            read(e, "n_origins", c.evaluation.n_origins);
            read(e, "skills", c.evaluation.skills);
        }
    } catch (const json::exception& e) {
        throw UsageError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

json PipelineConfig::to_json() const {
    json paths = json::array();
    for (const auto& p : data_paths) paths.push_back(p.generic_string());
    json sims = json::array();
    for (const auto& s : simulate) sims.push_back({{"name", s.name}, {"count", s.count}, {"spec", tidecast::to_json(s.spec)}});
    json aug = json::object();
    aug["mbb"] = augment.mbb ? json{{"n_variants", augment.mbb->n_variants}, {"block_len", augment.mbb->block_len}} : json(nullptr);
    aug["mixup"] = augment.mixup ? json{{"m", augment.mixup->m}, {"alpha", augment.mixup->alpha}, {"n_variants", augment.mixup->n_variants}}
                                 : json(nullptr);
    aug["dba"] = augment.dba ? json{{"k", augment.dba->k}, {"per_cluster", augment.dba->per_cluster}, {"iterations", augment.dba->iterations}}
                             : json(nullptr);
    const auto& cc = coordination.config;
    return {{"seed", seed},
            {"data", {{"paths", paths}, {"simulate", sims}}},
            {"augment", aug},
            {"model", model.to_json()},
            {"train", train_to_json(train)},
            {"fusion",
             {{"members", fusion.members},
              {"mode", std::string(tidecast::to_string(fusion.mode))},
              {"router_mode", std::string(tidecast::to_string(fusion.router.mode))},
              {"hidden", fusion.router.hidden},
              {"epochs", fusion.router.epochs},
              {"learning_rate", fusion.router.learning_rate},
              {"n_origins", fusion.n_origins}}},
            {"coordination",
             {{"tau1", cc.tau1},
              {"tau2", cc.large_threshold()},
              {"lambda", cc.lambda},
              {"steps", cc.steps},
              {"learning_rate", cc.learning_rate},
              {"s1_order", coordination.s1_order}}},
            {"evaluation",
             {{"horizon", evaluation.horizon}, {"n_origins", evaluation.n_origins}, {"skills", evaluation.skills}}}};
}

void PipelineConfig::validate() const {
    if (data_paths.empty() && simulate.empty()) throw UsageError("config: no data paths and no simulated datasets");
    for (const auto& s : simulate) {
        if (s.name.empty()) throw UsageError("config: simulated dataset without a name");
        if (s.count < 1) throw UsageError("config: simulated dataset '" + s.name + "' needs count >= 1");
        tidecast::validate(s.spec);
    }
    model.validate();
    if (train.steps == 0 || train.batch_size == 0) throw UsageError("config: train.steps and train.batch_size must be >= 1");
    coordination.config.validate();
    if (coordination.s1_order < 0) throw UsageError("config: coordination.s1_order must be >= 0");
    if (evaluation.horizon == 0 || evaluation.n_origins == 0)
        throw UsageError("config: evaluation.horizon and evaluation.n_origins must be >= 1");
    if (fusion.n_origins == 0) throw UsageError("config: fusion.n_origins must be >= 1");
    for (const auto& m : fusion.members) {
        if (!m.is_object() || !m.contains("name")) throw UsageError("config: every fusion member needs a name");
        if (m.value("name", std::string()) == "tsfm") throw UsageError("config: member name 'tsfm' is reserved");
    }
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read config file '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw UsageError("config file '" + path.string() + "': " + e.what());
    }
    PipelineConfig c = PipelineConfig::from_json(j);
    for (auto& p : c.data_paths)
        if (p.is_relative()) p = path.parent_path() / p;
    return c;
}

std::string inventory_csv(const std::vector<InventoryRow>& rows) {
    std::ostringstream os;
    os << "provenance,datasets,entries,points\n";
    for (const auto& r : rows) os << r.provenance << ',' << r.datasets << ',' << r.entries << ',' << r.points << '\n';
    return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw DataError("failed writing '" + path.string() + "'");
}

void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

namespace {

class Runner {
public:
    explicit Runner(std::filesystem::path dir) : dir_(std::move(dir)) {}

    template <typename F>
    void stage(const std::string& name, F&& fn) {
        try {
            fn();
            log_ << "stage " << name << ": ok\n";
        } catch (const UsageError& e) {
            throw UsageError(failure(name, e.what()));
        } catch (const DataError& e) {
            throw DataError(failure(name, e.what()));
        } catch (const NumericError& e) {
            throw NumericError(failure(name, e.what()));
        } catch (const std::filesystem::filesystem_error& e) {
            throw DataError(failure(name, e.what()));
        }
    }

    std::filesystem::path emit(const std::string& file, const std::string& text) {
        const auto p = dir_ / file;
        write_text(p, text);
        artifacts_.push_back(p);
        return p;
    }
    std::filesystem::path emit_json(const std::string& file, const json& j) { return emit(file, j.dump(2) + "\n"); }

    void log(const std::string& line) { log_ << line << '\n'; }
    std::string log_text() const { return log_.str(); }
    const std::vector<std::filesystem::path>& artifacts() const { return artifacts_; }
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::string failure(const std::string& name, const std::string& what) const {
        std::string msg = "stage '" + name + "' failed: " + what + "; completed artifacts:";
        if (artifacts_.empty()) msg += " none";
        for (const auto& a : artifacts_) msg += " " + a.string();
        return msg;
    }

    std::filesystem::path dir_;
    std::vector<std::filesystem::path> artifacts_;
    std::ostringstream log_;
};

std::size_t count_points(const std::vector<TimeSeries>& s) {
    std::size_t n = 0;
    for (const auto& x : s) n += x.size();
    return n;
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& config, const std::filesystem::path& run_dir) {
    config.validate();
    std::filesystem::create_directories(run_dir);
    Runner run(run_dir);
    run.emit_json("config.resolved.json", config.to_json());

    const std::size_t horizon = config.evaluation.horizon;
    const std::size_t holdout = horizon + config.evaluation.n_origins - 1;

    DatasetMap real, simulated, originals, augmented, mixed;
    std::vector<InventoryRow> inventory;
    run.stage("ingest", [&] {
        for (const auto& p : config.data_paths) {
            std::vector<Dataset> ds;
            if (std::filesystem::is_directory(p)) {
                ds = load_dataset_dir(p);
            } else {
                if (!std::filesystem::exists(p)) throw DataError("data path not found: '" + p.string() + "'");
                auto r = ingest(p);
                ds.push_back({p.stem().string(), std::move(r.series)});
            }
            for (auto& d : ds) {
                if (real.count(d.id) != 0) throw DataError("duplicate dataset name '" + d.id + "'");
                real[d.id] = std::move(d.series);
            }
        }
    });
    run.stage("simulate", [&] {
        for (const auto& sd : config.simulate) {
            if (real.count(sd.name) != 0 || simulated.count(sd.name) != 0)
                throw UsageError("duplicate dataset name '" + sd.name + "'");
            auto& out = simulated[sd.name];
            const std::uint64_t base = derive_seed(config.seed, "simulate." + sd.name);
            for (int i = 0; i < sd.count; ++i) {
                SyntheticSpec spec = sd.spec;
                spec.id = sd.name + "_" + std::to_string(i);
                out.push_back(generate(spec, derive_seed(base, static_cast<std::uint64_t>(i))));
            }
        }
        for (const auto& m : {&real, &simulated})
            for (const auto& [k, v] : *m) originals[k] = v;
    });

    // Training data: every original series minus its evaluation hold-out.
    DatasetMap train_orig;
    for (const auto& [name, series] : originals) {
        for (const auto& s : series) {
            if (s.size() <= holdout + 16) continue;
            const auto v = s.values();
            train_orig[name].push_back(s.derive(s.id(), std::vector<double>(v.begin(), v.end() - static_cast<std::ptrdiff_t>(holdout))));
        }
    }
    if (train_orig.empty()) throw DataError("no series longer than the evaluation hold-out plus 16 points");

    run.stage("augment", [&] {
        std::uint64_t idx = 0;
        if (config.augment.mbb) {
            const std::uint64_t base = derive_seed(config.seed, "augment.mbb");
            for (const auto& [name, series] : train_orig) {
                auto& out = augmented[name + ".mbb"];
                for (const auto& s : series) {
                    const int period = s.freq().steps_per_cycle;
                    if (period < 2 || s.size() < 2 * static_cast<std::size_t>(period)) continue;
                    auto vs = mbb_augment(s, period, config.augment.mbb->block_len, config.augment.mbb->n_variants,
                                          derive_seed(base, idx++));
                    for (auto& v : vs) out.push_back(std::move(v));
                }
                if (out.empty()) augmented.erase(name + ".mbb");
            }
        }
        if (config.augment.dba) {
            const std::uint64_t base = derive_seed(config.seed, "augment.dba");
            for (const auto& [name, series] : train_orig) {
                if (series.size() < static_cast<std::size_t>(config.augment.dba->k)) continue;
                auto vs = dba_augment(series, config.augment.dba->k, config.augment.dba->per_cluster,
                                      derive_seed(base, idx++), config.augment.dba->iterations);
                if (!vs.empty()) augmented[name + ".dba"] = std::move(vs);
            }
        }
        if (config.augment.mixup) {
            std::vector<TimeSeries> pooled;
            for (const auto& [name, series] : train_orig)
                for (const auto& s : series) pooled.push_back(s);
            if (pooled.size() >= static_cast<std::size_t>(config.augment.mixup->m)) {
                mixed["mixup"] = mixup_augment(pooled, config.augment.mixup->m, config.augment.mixup->alpha,
                                               config.augment.mixup->n_variants, derive_seed(config.seed, "augment.mixup"));
            }
        }
        std::vector<InventoryRow> inv(3);
        inv[0].provenance = "real-world";
        inv[1].provenance = "simulation & augmentation";
        inv[2].provenance = "mixup";
        const auto add = [](InventoryRow& row, const DatasetMap& m) {
            for (const auto& [k, v] : m) {
                ++row.datasets;
                row.entries += v.size();
                row.points += count_points(v);
            }
        };
        add(inv[0], real);
        add(inv[1], simulated);
        add(inv[1], augmented);
        add(inv[2], mixed);
        run.emit("inventory.csv", inventory_csv(inv));
        inventory = inv;
        run.log("inventory: " + std::to_string(inv[0].entries) + " real, " + std::to_string(inv[1].entries) +
                " simulated/augmented, " + std::to_string(inv[2].entries) + " mixup entries");
    });

    DatasetMap corpus = train_orig;
    for (const auto& m : {&augmented, &mixed})
        for (const auto& [k, v] : *m) corpus[k] = v;

    std::shared_ptr<const tsfm::Params> params;
    run.stage("train", [&] {
        tsfm::ModelConfig mc = config.model;
        const std::uint64_t seed = derive_seed(config.seed, "train");
        mc.seed = seed;
        auto result = tsfm::train(mc, corpus, config.train, seed);
        std::ostringstream w;
        w << "step,dataset,weight\n";
        for (std::size_t i = 0; i < result.weight_trajectory.size(); ++i)
            for (const auto& [k, v] : result.weight_trajectory[i]) w << i << ',' << k << ',' << format_number(v) << '\n';
        run.emit("weights.csv", w.str());
        if (result.diverged) {
            const auto ckpt = run.dir() / "model.checkpoint.json";
            tsfm::save(result.params, ckpt);
            throw NumericError("non-finite loss at step " + std::to_string(result.steps_completed) +
                               "; last good parameters saved to " + ckpt.string());
        }
        tsfm::save(result.params, run.dir() / "model.json");
        run.log("train: " + std::to_string(result.steps_completed) + " steps, final loss " +
                format_number(result.losses.empty() ? 0.0 : result.losses.back()));
        params = std::make_shared<const tsfm::Params>(std::move(result.params));
    });

    auto pool = std::make_shared<ModelPool>();
    std::shared_ptr<const Forecaster> large;
    run.stage("pool", [&] {
        for (const auto& m : config.fusion.members) pool->add(m.at("name").get<std::string>(), make_forecaster(m, run.dir()), m);
        large = std::make_shared<tsfm::TsfmForecaster>(params, Frequency::of(FreqClass::day), "model.json");
        pool->add("tsfm", large, json{{"name", "tsfm"}, {"kind", "tsfm"}, {"model", "model.json"}});
        run.emit_json("pool.json", pool->to_json());
        run.emit_json("profile.json", profile(*pool, train_orig, horizon, config.fusion.n_origins).to_json());
    });

    std::shared_ptr<FusedForecaster> fused;
    run.stage("fuse-train", [&] {
        fused = std::make_shared<FusedForecaster>(pool, config.fusion.mode);
        if (config.fusion.mode != FusionMode::average) {
            const auto examples =
                routing_examples(*pool, statistical_embedder(), train_orig, horizon, config.fusion.n_origins);
            if (examples.empty()) throw DataError("no routing windows in the training data");
            if (config.fusion.mode == FusionMode::linear)
                fused->set_linear(fit_linear_fusion(examples));
            else
                fused->set_router(train_router(examples, config.fusion.router, derive_seed(config.seed, "router")),
                                  config.fusion.router.mode);
        }
        run.emit_json("fusion.json", fused->to_json());
    });

    std::shared_ptr<CascadeForecaster> cascade;
    run.stage("coordinate", [&] {
        int order = config.coordination.s1_order;
        if (order == 0)
            for (const auto& [k, v] : train_orig)
                for (const auto& s : v) order = std::max(order, s.freq().steps_per_cycle);
        order = std::max(order, 1);
        std::vector<std::vector<double>> pooled;
        std::vector<TimeSeries> histories;
        for (const auto& [k, v] : train_orig) {
            for (const auto& s : v) {
                pooled.emplace_back(s.values().begin(), s.values().end());
                histories.push_back(s);
            }
        }
        const LinearARModel s1 = ar_fit_pooled(pooled, order, true);
        const auto res = coordinate_train(s1, *large, histories, horizon, config.coordination.config,
                                          derive_seed(config.seed, "coordinate"));
        cascade = std::make_shared<CascadeForecaster>(s1, res.s2, large, config.coordination.config);
        run.emit_json("coordination.json", {{"config", config.coordination.config.to_json()},
                                            {"s1", s1.to_json()},
                                            {"s2", res.s2.to_json()},
                                            {"easy", res.easy},
                                            {"hard", res.hard},
                                            {"challenging", res.challenging},
                                            {"no_challenging", res.no_challenging},
                                            {"final_loss", res.losses.empty() ? 0.0 : res.losses.back()}});
    });

    run.stage("forecast", [&] {
        json out = json::array();
        for (const auto& [name, series] : originals) {
            for (const auto& s : series) {
                if (s.size() < 16) continue;
                json members = json::object();
                const auto fs = pool->forecasts(s, horizon);
                for (std::size_t k = 0; k < pool->size(); ++k) members[(*pool)[k].name] = fs[k];
                out.push_back({{"dataset", name},
                               {"series", s.id()},
                               {"start", format_timestamp(advance(s.start(), s.freq(), static_cast<std::int64_t>(s.size())))},
                               {"fused", fused->predict_series(s, horizon)},
                               {"fusion_weights", fused->weights(s)},
                               {"cascade", cascade->predict_series(s, horizon)},
                               {"members", members}});
            }
        }
        run.emit_json("forecasts.json", out);
    });

    PipelineResult result;
    run.stage("evaluate", [&] {
        std::vector<NamedModel> models = pool->named();
        models.push_back({"fused", fused.get()});
        models.push_back({"cascade", cascade.get()});
        BenchmarkOptions bo;
        bo.horizon = horizon;
        bo.n_origins = config.evaluation.n_origins;
        result.report = rolling_benchmark(models, originals, bo);
        run.emit("report.csv", report_csv(result.report));
        run.emit_json("report.json", report_json(result.report));
        if (config.evaluation.skills)
            run.emit("skills.csv", skill_csv(skill_report(*fused, derive_seed(config.seed, "skills"))));
    });

    run.emit("run.log", run.log_text());
    result.run_dir = run_dir;
    result.artifacts = run.artifacts();
    result.inventory = std::move(inventory);
    return result;
}

}  // namespace tidecast
