#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "tidecast/augment.hpp"
#include "tidecast/baselines.hpp"
#include "tidecast/core_data.hpp"
#include "tidecast/decomp.hpp"
#include "tidecast/dromix.hpp"
#include "tidecast/error.hpp"
#include "tidecast/eval.hpp"
#include "tidecast/fusion.hpp"
#include "tidecast/kernels.hpp"
#include "tidecast/pipeline.hpp"
#include "tidecast/rng.hpp"
#include "tidecast/simulate.hpp"
#include "tidecast/tsfm.hpp"

#ifndef TIDECAST_VERSION
#define TIDECAST_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tidecast;

namespace {

// Shared flags. Values from --config fill in any option not given on the
// command line; keys that match no option are rejected.
struct Common {
    std::uint64_t seed = 0;
    std::string config;
    std::string output;
    CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* app, Common& c, bool output_required = true) {
    c.seed_opt = app->add_option("--seed", c.seed, "Global seed");
    app->add_option("--config", c.config, "JSON file with option values");
    auto* out = app->add_option("--output,-o", c.output, "Output file or directory");
    if (output_required) out->required();
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("'" + path.string() + "': " + e.what());
    }
}

class Resolver {
public:
    Resolver(CLI::App* app, const Common& c) : app_(app) {
        if (!c.config.empty()) {
            cfg_ = read_json_file(c.config);
            if (!cfg_.is_object()) throw UsageError("config '" + c.config + "' must be a JSON object");
        }
        used_.insert("seed");
        if (cfg_.contains("seed") && !c.seed_opt->count()) seed_ = cfg_["seed"].get<std::uint64_t>();
        else seed_ = c.seed;
    }

    // `value` holds the command-line value or the built-in default.
    template <typename T>
    T get(const std::string& key, const T& value) {
        used_.insert(key);
        const auto* opt = app_->get_option_no_throw("--" + dashed(key));
        if (opt && opt->count()) return value;
        if (cfg_.contains(key)) {
            try {
                return cfg_[key].get<T>();
            } catch (const json::exception& e) {
                throw UsageError("config key '" + key + "': " + e.what());
            }
        }
        return value;
    }

    const json& raw() const { return cfg_; }
    void allow(const std::string& key) { used_.insert(key); }
    std::uint64_t seed() const { return seed_; }

    void finish() const {
        for (const auto& [k, v] : cfg_.items())
            if (!used_.count(k)) throw UsageError("config: unknown key '" + k + "'");
    }

private:
    static std::string dashed(std::string s) {
        for (char& ch : s)
            if (ch == '_') ch = '-';
        return s;
    }

    CLI::App* app_;
    json cfg_ = json::object();
    std::set<std::string> used_;
    std::uint64_t seed_ = 0;
};

DatasetMap load_data(const fs::path& path) {
    if (path.empty()) throw UsageError("no input data given");
    if (!fs::exists(path)) throw DataError("input not found: '" + path.string() + "'");
    if (fs::is_directory(path)) return to_dataset_map(load_dataset_dir(path));
    auto r = ingest(path);
    for (const auto& e : r.rejected) std::cerr << "warning: " << path.string() << ": " << e.message << '\n';
    return {{path.stem().string(), std::move(r.series)}};
}

std::vector<TimeSeries> load_series(const fs::path& path) {
    if (!fs::exists(path)) throw DataError("input not found: '" + path.string() + "'");
    auto r = ingest(path);
    for (const auto& e : r.rejected) std::cerr << "warning: " << path.string() << ": " << e.message << '\n';
    if (r.series.empty()) throw DataError("no valid series in '" + path.string() + "'");
    return std::move(r.series);
}

std::vector<TimeSeries> flatten(const DatasetMap& m) {
    std::vector<TimeSeries> out;
    for (const auto& [k, v] : m) out.insert(out.end(), v.begin(), v.end());
    return out;
}

void done(const fs::path& p) { std::cerr << "wrote " << p.string() << '\n'; }

// Pool files reference model files relative to their own directory; saved
// fusion files may live elsewhere, so such paths are made absolute.
json absolutize_pool(json pool, const fs::path& base) {
    for (auto& m : pool["members"])
        if (m.contains("model") && m["model"].is_string()) {
            fs::path p = m["model"].get<std::string>();
            if (p.is_relative()) m["model"] = fs::absolute(base / p).lexically_normal().string();
        }
    return pool;
}

int run(int argc, char** argv) {
    CLI::App app{"Hybrid time-series forecasting toolkit"};
    app.require_subcommand(1);

    // version / info -------------------------------------------------------
    Common c_version, c_info;
    auto* version = app.add_subcommand("version", "Print the version");
    add_common(version, c_version, false);
    auto* info = app.add_subcommand("info", "Print build and runtime information");
    add_common(info, c_info, false);

    // simulate ---------------------------------------------------------------
    Common c_sim;
    std::size_t sim_count = 1;
    bool sim_skills = false;
    auto* simulate = app.add_subcommand("simulate", "Generate synthetic series from a spec (--config) or the skill suite");
    add_common(simulate, c_sim);
    simulate->add_option("--count", sim_count, "Number of series");
    simulate->add_flag("--skills", sim_skills, "Write the seven-skill probe suite, one file per skill");

    // augment ----------------------------------------------------------------
    Common c_aug;
    std::string aug_input, aug_method;
    int aug_variants = 2, aug_period = 0, aug_m = 2, aug_k = 2, aug_factor = 2;
    std::size_t aug_block = 0;
    double aug_alpha = 1.0;
    auto* augment = app.add_subcommand("augment", "Augment series by MBB, DBA, mixup or frequency aggregation");
    add_common(augment, c_aug);
    augment->add_option("--input,-i", aug_input, "Input .jsonl or .csv");
    augment->add_option("--method", aug_method, "mbb | dba | mixup | aggregate");
    augment->add_option("--n-variants", aug_variants, "Variants per series (mbb), per cluster (dba) or in total (mixup)");
    augment->add_option("--period", aug_period, "Season length (0: series period)");
    augment->add_option("--block-len", aug_block, "MBB block length (0: twice the period)");
    augment->add_option("--m", aug_m, "Series per mixup combination");
    augment->add_option("--alpha", aug_alpha, "Dirichlet concentration");
    augment->add_option("--k", aug_k, "k-shape clusters");
    augment->add_option("--factor", aug_factor, "Aggregation factor");

    // decompose ----------------------------------------------------------------
    Common c_dec;
    std::string dec_input;
    int dec_period = 0, dec_inner = 2;
    auto* decompose = app.add_subcommand("decompose", "STL decomposition to CSV");
    add_common(decompose, c_dec);
    decompose->add_option("--input,-i", dec_input, "Input .jsonl or .csv");
    decompose->add_option("--period", dec_period, "Season length (0: series period)");
    decompose->add_option("--inner-iters", dec_inner, "Inner loop iterations");

    // dro-weights ------------------------------------------------------------
    Common c_dro;
    std::string dro_data;
    DroOptions dro_opts;
    auto* dro = app.add_subcommand("dro-weights", "Group-DRO dataset weights over a dataset directory");
    add_common(dro, c_dro);
    dro->add_option("--data", dro_data, "Dataset directory or file");
    dro->add_option("--steps", dro_opts.steps);
    dro->add_option("--batch-size", dro_opts.batch_size);
    dro->add_option("--learning-rate", dro_opts.learning_rate);
    dro->add_option("--eta", dro_opts.eta);
    dro->add_option("--smoothing", dro_opts.smoothing);
    dro->add_option("--order", dro_opts.order, "Learner AR order (0: smallest period)");
    dro->add_option("--holdout-fraction", dro_opts.holdout_fraction);
    dro->add_flag("--loss-multiplier", dro_opts.loss_multiplier);

    // train-tsfm -------------------------------------------------------------
    Common c_train;
    std::string train_data;
    tsfm::TrainOptions topts;
    auto* train = app.add_subcommand("train-tsfm", "Train the MoE forecaster; config keys 'model' and 'train'");
    add_common(train, c_train);
    train->add_option("--data", train_data, "Dataset directory or file");
    train->add_option("--steps", topts.steps);
    train->add_option("--batch-size", topts.batch_size);
    train->add_flag("--full-batch", topts.full_batch);
    train->add_flag("--dro", topts.dro, "DRO-weighted dataset sampling");
    train->add_flag("--loss-multiplier", topts.loss_multiplier);

    // forecast -----------------------------------------------------------------
    Common c_fc;
    std::string fc_model, fc_input;
    std::size_t fc_horizon = 12;
    auto* forecast = app.add_subcommand("forecast", "Forecast with a trained model");
    add_common(forecast, c_fc);
    forecast->add_option("--model", fc_model, "Model file");
    forecast->add_option("--input,-i", fc_input, "Input .jsonl or .csv");
    forecast->add_option("--horizon", fc_horizon);

    // fuse-train ---------------------------------------------------------------
    Common c_ft;
    std::string ft_pool, ft_data, ft_mode = "router", ft_router_mode = "best_member_ce";
    std::size_t ft_horizon = 12, ft_origins = 4;
    RouterTrainOptions ft_opts;
    auto* fuse_train = app.add_subcommand("fuse-train", "Fit a fusion rule over a model pool");
    add_common(fuse_train, c_ft);
    fuse_train->add_option("--pool", ft_pool, "Pool file");
    fuse_train->add_option("--data", ft_data, "Dataset directory or file");
    fuse_train->add_option("--mode", ft_mode, "average | linear | router");
    fuse_train->add_option("--router-mode", ft_router_mode, "best_member_ce | end_to_end");
    fuse_train->add_option("--horizon", ft_horizon);
    fuse_train->add_option("--n-origins", ft_origins);
    fuse_train->add_option("--hidden", ft_opts.hidden);
    fuse_train->add_option("--epochs", ft_opts.epochs);
    fuse_train->add_option("--learning-rate", ft_opts.learning_rate);

    // fuse ---------------------------------------------------------------------
    Common c_fu;
    std::string fu_fusion, fu_input;
    std::size_t fu_horizon = 12;
    auto* fuse = app.add_subcommand("fuse", "Fused forecasts from a fusion file");
    add_common(fuse, c_fu);
    fuse->add_option("--fusion", fu_fusion, "Fusion file");
    fuse->add_option("--input,-i", fu_input, "Input .jsonl or .csv");
    fuse->add_option("--horizon", fu_horizon);

    // coordinate ---------------------------------------------------------------
    Common c_co;
    std::string co_data, co_large;
    std::size_t co_horizon = 12;
    int co_order = 0;
    CoordinationConfig co_cfg;
    double co_tau2 = -1.0;
    auto* coordinate = app.add_subcommand("coordinate", "Distil s2 from s1 and a large model, then route the cascade");
    add_common(coordinate, c_co);
    coordinate->add_option("--data", co_data, "Dataset directory or file");
    coordinate->add_option("--large", co_large, "Large model file");
    coordinate->add_option("--horizon", co_horizon);
    coordinate->add_option("--order", co_order, "s1 AR order (0: largest period)");
    coordinate->add_option("--tau1", co_cfg.tau1);
    coordinate->add_option("--tau2", co_tau2, "Large-model threshold (default tau1)");
    coordinate->add_option("--lambda", co_cfg.lambda);
    coordinate->add_option("--steps", co_cfg.steps);
    coordinate->add_option("--learning-rate", co_cfg.learning_rate);

    // evaluate -----------------------------------------------------------------
    Common c_ev;
    std::string ev_pool, ev_fusion, ev_data;
    BenchmarkOptions ev_opts;
    bool ev_skills = false;
    auto* evaluate = app.add_subcommand("evaluate", "Rolling-origin benchmark of a pool (and fusion)");
    add_common(evaluate, c_ev);
    evaluate->add_option("--pool", ev_pool, "Pool file");
    evaluate->add_option("--fusion", ev_fusion, "Fusion file, scored as 'fused'");
    evaluate->add_option("--data", ev_data, "Dataset directory or file");
    evaluate->add_option("--horizon", ev_opts.horizon);
    evaluate->add_option("--n-origins", ev_opts.n_origins);
    evaluate->add_option("--step", ev_opts.step);
    evaluate->add_option("--min-context", ev_opts.min_context);
    evaluate->add_flag("--clamp", ev_opts.clamp_one_minus_mape, "Clamp 1-MAPE at zero");
    evaluate->add_flag("--skills", ev_skills, "Also run the skill probes for every model");

    // run-pipeline -------------------------------------------------------------
    Common c_pipe;
    auto* pipeline = app.add_subcommand("run-pipeline", "End-to-end pipeline into a run directory");
    add_common(pipeline, c_pipe);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return 1;
    }

    if (version->parsed()) {
        Resolver r(version, c_version);
        r.finish();
        std::cout << "tidecast " << TIDECAST_VERSION << '\n';
        return 0;
    }
    if (info->parsed()) {
        Resolver r(info, c_info);
        r.finish();
        json j{{"version", TIDECAST_VERSION},
               {"kernel_isa", std::string(kernels::isa_name(kernels::active_isa()))},
               {"avx2_supported", kernels::isa_supported(kernels::Isa::avx2)},
               {"neon_supported", kernels::isa_supported(kernels::Isa::neon)},
               {"model_format_version", tsfm::kFormatVersion},
               {"compiler", __VERSION__}};
        if (!c_info.output.empty()) {
            write_json(c_info.output, j);
            done(c_info.output);
        } else {
            std::cout << j.dump(2) << '\n';
        }
        return 0;
    }

    if (simulate->parsed()) {
        Resolver r(simulate, c_sim);
        const bool skills = r.get("skills", sim_skills);
        const std::size_t count = r.get("count", sim_count);
        if (skills) {
            r.finish();
            for (const auto& [name, series] : skill_suite(derive_seed(r.seed(), "simulate"))) {
                const fs::path p = fs::path(c_sim.output) / (name + ".jsonl");
                write_jsonl(p, series);
                done(p);
            }
            return 0;
        }
        json spec_json = r.raw();
        for (const auto& k : {"seed", "count", "skills"}) spec_json.erase(k);
        for (const auto& [k, v] : spec_json.items()) r.allow(k);
        r.finish();
        const SyntheticSpec spec =
            spec_json.empty() ? PipelineConfig::desk_default().simulate.front().spec : spec_from_json(spec_json);
        validate(spec);
        std::vector<TimeSeries> out;
        for (std::size_t i = 0; i < count; ++i) {
            SyntheticSpec s = spec;
            s.id = spec.id + (count > 1 ? "_" + std::to_string(i) : "");
            out.push_back(generate(s, derive_seed(derive_seed(r.seed(), "simulate"), i)));
        }
        write_jsonl(c_sim.output, out);
        done(c_sim.output);
        return 0;
    }

    if (augment->parsed()) {
        Resolver r(augment, c_aug);
        const fs::path input = r.get("input", aug_input);
        const std::string method = r.get("method", aug_method);
        const int variants = r.get("n_variants", aug_variants);
        const int period_opt = r.get("period", aug_period);
        const std::size_t block = r.get("block_len", aug_block);
        const int m = r.get("m", aug_m);
        const double alpha = r.get("alpha", aug_alpha);
        const int k = r.get("k", aug_k);
        const int factor = r.get("factor", aug_factor);
        r.finish();
        if (input.empty()) throw UsageError("augment: --input is required");
        const auto series = load_series(input);
        const std::uint64_t seed = derive_seed(r.seed(), "augment");
        std::vector<TimeSeries> out;
        if (method == "mbb") {
            for (std::size_t i = 0; i < series.size(); ++i) {
                const int period = period_opt > 0 ? period_opt : series[i].freq().steps_per_cycle;
                auto vs = mbb_augment(series[i], period, block, variants, derive_seed(seed, i));
                out.insert(out.end(), vs.begin(), vs.end());
            }
        } else if (method == "dba") {
            out = dba_augment(series, k, variants, seed);
        } else if (method == "mixup") {
            out = mixup_augment(series, m, alpha, variants, seed);
        } else if (method == "aggregate") {
            for (const auto& s : series) out.push_back(frequency_aggregate(s, factor, AggregateMode::mean));
        } else {
            throw UsageError("augment: --method must be mbb, dba, mixup or aggregate");
        }
        write_jsonl(c_aug.output, out);
        done(c_aug.output);
        return 0;
    }

    if (decompose->parsed()) {
        Resolver r(decompose, c_dec);
        const fs::path input = r.get("input", dec_input);
        const int period_opt = r.get("period", dec_period);
        const int inner = r.get("inner_iters", dec_inner);
        r.finish();
        if (input.empty()) throw UsageError("decompose: --input is required");
        std::ostringstream os;
        os << "series,t,value,trend,seasonal,residual\n";
        for (const auto& s : load_series(input)) {
            const int period = period_opt > 0 ? period_opt : s.freq().steps_per_cycle;
            const Decomposition d = stl_decompose(s, period, inner);
            for (std::size_t t = 0; t < s.size(); ++t)
                os << s.id() << ',' << t << ',' << format_number(s.values()[t]) << ',' << format_number(d.trend[t]) << ','
                   << format_number(d.seasonal[t]) << ',' << format_number(d.residual[t]) << '\n';
        }
        write_text(c_dec.output, os.str());
        done(c_dec.output);
        return 0;
    }

    if (dro->parsed()) {
        Resolver r(dro, c_dro);
        const fs::path data = r.get("data", dro_data);
        DroOptions o;
        o.steps = r.get("steps", dro_opts.steps);
        o.batch_size = r.get("batch_size", dro_opts.batch_size);
        o.learning_rate = r.get("learning_rate", dro_opts.learning_rate);
        o.eta = r.get("eta", dro_opts.eta);
        o.smoothing = r.get("smoothing", dro_opts.smoothing);
        o.order = r.get("order", dro_opts.order);
        o.holdout_fraction = r.get("holdout_fraction", dro_opts.holdout_fraction);
        o.loss_multiplier = r.get("loss_multiplier", dro_opts.loss_multiplier);
        r.finish();
        const DroRun result = run_dro(load_data(data), o, derive_seed(r.seed(), "dro"));
        write_json(c_dro.output, result.to_json());
        done(c_dro.output);
        return 0;
    }

    if (train->parsed()) {
        Resolver r(train, c_train);
        const fs::path data = r.get("data", train_data);
        tsfm::ModelConfig mc;
        if (r.raw().contains("model")) mc = tsfm::ModelConfig::from_json(r.raw()["model"]);
        r.allow("model");
        tsfm::TrainOptions o = topts;
        if (r.raw().contains("train")) {
            const auto& t = r.raw()["train"];
            for (const auto& [k, v] : t.items()) {
                if (k == "steps") o.steps = v.get<std::size_t>();
                else if (k == "batch_size") o.batch_size = v.get<std::size_t>();
                else if (k == "full_batch") o.full_batch = v.get<bool>();
                else if (k == "dro") o.dro = v.get<bool>();
                else if (k == "loss_multiplier") o.loss_multiplier = v.get<bool>();
                else if (k == "dro_every") o.dro_every = v.get<std::size_t>();
                else if (k == "eta") o.eta = v.get<double>();
                else if (k == "smoothing") o.smoothing = v.get<double>();
                else if (k == "eval_series_per_dataset") o.eval_series_per_dataset = v.get<std::size_t>();
                else throw UsageError("config: unknown key 'train." + k + "'");
            }
        }
        r.allow("train");
        if (train->get_option("--steps")->count()) o.steps = topts.steps;
        if (train->get_option("--batch-size")->count()) o.batch_size = topts.batch_size;
        if (train->get_option("--full-batch")->count()) o.full_batch = true;
        if (train->get_option("--dro")->count()) o.dro = true;
        if (train->get_option("--loss-multiplier")->count()) o.loss_multiplier = true;
        r.finish();
        mc.seed = derive_seed(r.seed(), "train");
        const auto result = tsfm::train(mc, load_data(data), o, mc.seed);
        if (result.diverged) {
            fs::path ckpt = c_train.output;
            ckpt += ".checkpoint.json";
            tsfm::save(result.params, ckpt);
            throw NumericError("non-finite loss at step " + std::to_string(result.steps_completed) +
                               "; last good parameters saved to " + ckpt.string());
        }
        tsfm::save(result.params, c_train.output);
        std::cerr << "trained " << result.steps_completed << " steps, final loss "
                  << format_number(result.losses.empty() ? 0.0 : result.losses.back()) << '\n';
        done(c_train.output);
        return 0;
    }

    if (forecast->parsed()) {
        Resolver r(forecast, c_fc);
        const fs::path model = r.get("model", fc_model);
        const fs::path input = r.get("input", fc_input);
        const std::size_t horizon = r.get("horizon", fc_horizon);
        r.finish();
        if (model.empty() || input.empty()) throw UsageError("forecast: --model and --input are required");
        const tsfm::Params params = tsfm::load(model);
        json out = json::array();
        for (const auto& s : load_series(input)) {
            const auto f = tsfm::forecast(params, s, horizon);
            json dist = json::array();
            for (const auto& d : f.dist) dist.push_back({{"nu", d.nu}, {"mu", d.mu}, {"sigma", d.sigma}});
            out.push_back({{"series", s.id()},
                           {"start", format_timestamp(advance(s.start(), s.freq(), static_cast<std::int64_t>(s.size())))},
                           {"point", f.point},
                           {"distribution", dist},
                           {"confidence", f.confidence},
                           {"forward_passes", f.forward_passes}});
        }
        write_json(c_fc.output, out);
        done(c_fc.output);
        return 0;
    }

    if (fuse_train->parsed()) {
        Resolver r(fuse_train, c_ft);
        const fs::path pool_path = r.get("pool", ft_pool);
        const fs::path data = r.get("data", ft_data);
        const FusionMode mode = parse_fusion_mode(r.get("mode", ft_mode));
        RouterTrainOptions o;
        o.mode = parse_router_mode(r.get("router_mode", ft_router_mode));
        o.hidden = r.get("hidden", ft_opts.hidden);
        o.epochs = r.get("epochs", ft_opts.epochs);
        o.learning_rate = r.get("learning_rate", ft_opts.learning_rate);
        const std::size_t horizon = r.get("horizon", ft_horizon);
        const std::size_t origins = r.get("n_origins", ft_origins);
        r.finish();
        if (pool_path.empty()) throw UsageError("fuse-train: --pool is required");
        const json pool_json = absolutize_pool(read_json_file(pool_path), pool_path.parent_path());
        auto pool = std::make_shared<const ModelPool>(ModelPool::from_json(pool_json));
        FusedForecaster fused(pool, mode);
        if (mode != FusionMode::average) {
            const auto examples = routing_examples(*pool, statistical_embedder(), load_data(data), horizon, origins);
            if (examples.empty()) throw DataError("fuse-train: no series long enough for a training window");
            if (mode == FusionMode::linear) fused.set_linear(fit_linear_fusion(examples));
            else fused.set_router(train_router(examples, o, derive_seed(r.seed(), "router")), o.mode);
        }
        write_json(c_ft.output, fused.to_json());
        done(c_ft.output);
        return 0;
    }

    if (fuse->parsed()) {
        Resolver r(fuse, c_fu);
        const fs::path fusion_path = r.get("fusion", fu_fusion);
        const fs::path input = r.get("input", fu_input);
        const std::size_t horizon = r.get("horizon", fu_horizon);
        r.finish();
        if (fusion_path.empty() || input.empty()) throw UsageError("fuse: --fusion and --input are required");
        const FusedForecaster fused = FusedForecaster::load(fusion_path);
        json out = json::array();
        for (const auto& s : load_series(input)) {
            out.push_back({{"series", s.id()},
                           {"start", format_timestamp(advance(s.start(), s.freq(), static_cast<std::int64_t>(s.size())))},
                           {"forecast", fused.predict_series(s, horizon)},
                           {"weights", fused.weights(s)},
                           {"members", fused.pool().names()}});
        }
        write_json(c_fu.output, out);
        done(c_fu.output);
        return 0;
    }

    if (coordinate->parsed()) {
        Resolver r(coordinate, c_co);
        const fs::path data = r.get("data", co_data);
        const fs::path large_path = r.get("large", co_large);
        const std::size_t horizon = r.get("horizon", co_horizon);
        int order = r.get("order", co_order);
        CoordinationConfig cfg;
        cfg.tau1 = r.get("tau1", co_cfg.tau1);
        const double tau2 = r.get("tau2", co_tau2);
        if (tau2 >= 0.0) cfg.tau2 = tau2;
        cfg.lambda = r.get("lambda", co_cfg.lambda);
        cfg.steps = r.get("steps", co_cfg.steps);
        cfg.learning_rate = r.get("learning_rate", co_cfg.learning_rate);
        r.finish();
        cfg.validate();
        if (large_path.empty()) throw UsageError("coordinate: --large is required");
        const auto series = flatten(load_data(data));
        if (series.empty()) throw DataError("coordinate: no series in '" + data.string() + "'");
        auto params = std::make_shared<const tsfm::Params>(tsfm::load(large_path));
        const tsfm::TsfmForecaster large(params, series[0].freq(), large_path.string());
        if (order == 0)
            for (const auto& s : series) order = std::max(order, s.freq().steps_per_cycle);
        std::vector<std::vector<double>> pooled;
        for (const auto& s : series) pooled.emplace_back(s.values().begin(), s.values().end());
        const LinearARModel s1 = ar_fit_pooled(pooled, std::max(order, 1), true);
        const auto res = coordinate_train(s1, large, series, horizon, cfg, derive_seed(r.seed(), "coordinate"));
        json routes = json::array();
        for (const auto& s : series) {
            const auto c = coordinate_infer(s1, res.s2, large, s, horizon, cfg);
            routes.push_back({{"series", s.id()},
                              {"route", std::string(to_string(c.route))},
                              {"confidence_s1", c.confidence_s1},
                              {"confidence_s2", c.confidence_s2},
                              {"forecast", c.forecast}});
        }
        write_json(c_co.output, {{"config", cfg.to_json()},
                                 {"s1", s1.to_json()},
                                 {"s2", res.s2.to_json()},
                                 {"easy", res.easy},
                                 {"hard", res.hard},
                                 {"challenging", res.challenging},
                                 {"no_challenging", res.no_challenging},
                                 {"losses", res.losses},
                                 {"routes", routes}});
        done(c_co.output);
        return 0;
    }

    if (evaluate->parsed()) {
        Resolver r(evaluate, c_ev);
        const fs::path pool_path = r.get("pool", ev_pool);
        const fs::path fusion_path = r.get("fusion", ev_fusion);
        const fs::path data = r.get("data", ev_data);
        BenchmarkOptions o;
        o.horizon = r.get("horizon", ev_opts.horizon);
        o.n_origins = r.get("n_origins", ev_opts.n_origins);
        o.step = r.get("step", ev_opts.step);
        o.min_context = r.get("min_context", ev_opts.min_context);
        o.clamp_one_minus_mape = r.get("clamp", ev_opts.clamp_one_minus_mape);
        const bool skills = r.get("skills", ev_skills);
        r.finish();
        if (pool_path.empty()) throw UsageError("evaluate: --pool is required");
        const ModelPool pool = ModelPool::load(pool_path);
        std::vector<NamedModel> models = pool.named();
        std::optional<FusedForecaster> fused;
        if (!fusion_path.empty()) {
            fused.emplace(FusedForecaster::load(fusion_path));
            models.push_back({"fused", &*fused});
        }
        const MetricReport rep = rolling_benchmark(models, load_data(data), o);
        for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
        const fs::path dir = c_ev.output;
        write_text(dir / "report.csv", report_csv(rep));
        write_json(dir / "report.json", report_json(rep));
        if (skills)
            for (const auto& m : models)
                write_text(dir / ("skills_" + m.name + ".csv"), skill_csv(skill_report(*m.model, derive_seed(r.seed(), "skills"))));
        std::cout << report_csv(rep);
        done(dir);
        return 0;
    }

    if (pipeline->parsed()) {
        PipelineConfig cfg =
            c_pipe.config.empty() ? PipelineConfig::desk_default() : load_pipeline_config(c_pipe.config);
        if (c_pipe.seed_opt->count()) cfg.seed = c_pipe.seed;
        const auto result = run_pipeline(cfg, c_pipe.output);
        std::cout << inventory_csv(result.inventory) << '\n' << report_csv(result.report);
        done(c_pipe.output);
        return 0;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 3;
    } catch (const json::exception& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
