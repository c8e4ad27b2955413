#include "tidecast/simulate.hpp"

#include "tidecast/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>

namespace tidecast {

namespace {

constexpr double kMaxMagnitude = 1e12;

struct Components {
    std::vector<double> trend;
    std::vector<double> season;
    std::vector<double> noise;
};

std::vector<double> trend_values(const TrendSpec& t, std::size_t n) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = static_cast<double>(i);
        out[i] = t.kind == TrendSpec::Kind::linear ? t.intercept + t.slope_or_rate * x
                                                   : t.intercept * std::exp(t.slope_or_rate * x);
    }
    return out;
}

std::vector<double> season_values(const SeasonSpec& s, std::size_t n, Rng& rng) {
    std::vector<double> out(n);
    if (s.kind == SeasonSpec::Kind::cosine) {
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = s.amplitude * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / s.period + s.phase);
        }
        return out;
    }
    std::vector<double> shape = s.template_;
    if (shape.empty()) {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        shape.resize(static_cast<std::size_t>(s.period));
        for (double& v : shape) v = u(rng);
        const double mean = std::accumulate(shape.begin(), shape.end(), 0.0) / static_cast<double>(shape.size());
        for (double& v : shape) v -= mean;
    }
    for (std::size_t i = 0; i < n; ++i) out[i] = s.amplitude * shape[i % shape.size()];
    return out;
}

std::vector<double> noise_values(const NoiseSpec& s, std::size_t n, Rng& rng) {
    std::vector<double> out(n, 0.0);
    if (s.sigma == 0.0) return out;
    std::normal_distribution<double> eps(0.0, s.sigma);
    const double phi = s.kind == NoiseSpec::Kind::red ? s.ar_coefficient : 0.0;
    double prev = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        prev = phi * prev + eps(rng);
        out[i] = prev;
    }
    return out;
}

std::vector<double> compose(const SyntheticSpec& spec, const Components& c, bool with_noise) {
    const std::size_t n = c.trend.size();
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double season = c.season.empty() ? 0.0 : c.season[i];
        const double noise = with_noise ? c.noise[i] : 0.0;
        if (spec.composition == SyntheticSpec::Composition::additive) {
            y[i] = c.trend[i] + season + noise;
        } else {
            y[i] = c.trend[i] * (1.0 + season / std::max(std::abs(c.trend[i]), 1.0)) * (1.0 + noise);
        }
    }
    return y;
}

// Values of a single-regime spec over `n` steps; `clean` receives the
// noiseless path.
std::vector<double> regime(const SyntheticSpec& spec, std::size_t n, std::uint64_t seed, std::vector<double>* clean) {
    Rng season_rng = make_rng(derive_seed(seed, "season"));
    Rng noise_rng = make_rng(derive_seed(seed, "noise"));
    Components c;
    c.trend = trend_values(spec.trend, n);
    if (spec.season) c.season = season_values(*spec.season, n, season_rng);
    c.noise = noise_values(spec.noise, n, noise_rng);
    if (clean) *clean = compose(spec, c, false);
    return compose(spec, c, true);
}

std::vector<double> generate_values(const SyntheticSpec& spec, std::size_t n, std::uint64_t seed,
                                    std::vector<double>* clean) {
    if (!spec.transition) return regime(spec, n, seed, clean);
    const auto& tr = *spec.transition;
    std::vector<double> clean_a, clean_b;
    auto a = regime(spec, n, derive_seed(seed, "segment-0"), &clean_a);
    auto b = generate_values(*tr.next, n, derive_seed(seed, "segment-1"), &clean_b);
    const std::size_t k = tr.split_index;
    const double offset = tr.discontinuous ? 0.0 : clean_a[k] - clean_b[k];
    for (std::size_t i = k; i < n; ++i) {
        a[i] = b[i] + offset;
        clean_a[i] = clean_b[i] + offset;
    }
    if (clean) *clean = std::move(clean_a);
    return a;
}

void validate_regime(const SyntheticSpec& spec, std::size_t length, const std::string& where) {
    const auto bad = [&](const std::string& msg) { throw UsageError("synthetic spec " + where + ": " + msg); };
    if (spec.trend.kind == TrendSpec::Kind::exponential) {
        const double last = static_cast<double>(length - 1);
        const double peak = std::abs(spec.trend.intercept) *
                            std::max(1.0, std::exp(spec.trend.slope_or_rate * last));
        if (!(peak <= kMaxMagnitude)) bad("exponential trend exceeds 1e12 within the requested length");
    }
    if (spec.season) {
        if (spec.season->period < 2) bad("season.period must be at least 2");
        if (!spec.season->template_.empty() &&
            spec.season->template_.size() != static_cast<std::size_t>(spec.season->period)) {
            bad("season.template length must equal season.period");
        }
    }
    if (!(spec.noise.sigma >= 0.0)) bad("noise.sigma must be non-negative");
    if (spec.noise.kind == NoiseSpec::Kind::red && !(std::abs(spec.noise.ar_coefficient) < 1.0)) {
        bad("noise.ar_coefficient must lie in (-1, 1)");
    }
    if (spec.transition) {
        if (!spec.transition->next) bad("transition has no second spec");
        if (spec.transition->split_index == 0 || spec.transition->split_index >= length) {
            bad("transition.split_index must lie in (0, length)");
        }
        validate_regime(*spec.transition->next, length, where + ".transition");
    }
}

}  // namespace

void validate(const SyntheticSpec& spec) {
    if (spec.length < 1) throw UsageError("synthetic spec: length must be positive");
    validate_regime(spec, spec.length, "'" + spec.id + "'");
}

TimeSeries generate(const SyntheticSpec& spec, std::uint64_t seed) {
    validate(spec);
    auto values = generate_values(spec, spec.length, seed, nullptr);
    return TimeSeries(spec.id, spec.freq, spec.start, std::move(values));
}

// ---------------------------------------------------------------------------
// JSON

namespace {

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw UsageError("synthetic spec: '" + where + "' must be an object");
    for (const auto& [key, _] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
            throw UsageError("synthetic spec: unknown key '" + key + "' in " + where);
        }
    }
}

SyntheticSpec regime_from_json(const nlohmann::json& j, const std::string& where) {
    check_keys(j, {"length", "trend", "season", "noise", "composition", "transition", "id", "freq", "period", "start"},
               where);
    SyntheticSpec spec;
    spec.length = j.value("length", spec.length);
    if (j.contains("id")) spec.id = j["id"].get<std::string>();
    if (j.contains("freq")) spec.freq = Frequency::of(parse_freq_class(j["freq"].get<std::string>()));
    if (j.contains("period")) spec.freq.steps_per_cycle = j["period"].get<int>();
    if (j.contains("start")) spec.start = parse_timestamp(j["start"].get<std::string>());

    if (j.contains("trend")) {
        const auto& t = j["trend"];
        check_keys(t, {"kind", "slope_or_rate", "intercept"}, where + ".trend");
        const auto kind = t.value("kind", std::string("linear"));
        if (kind != "linear" && kind != "exponential") throw UsageError("synthetic spec: unknown trend kind '" + kind + "'");
        spec.trend.kind = kind == "linear" ? TrendSpec::Kind::linear : TrendSpec::Kind::exponential;
        spec.trend.slope_or_rate = t.value("slope_or_rate", 0.0);
        spec.trend.intercept = t.value("intercept", 0.0);
    }
    if (j.contains("season") && !j["season"].is_null()) {
        const auto& s = j["season"];
        check_keys(s, {"kind", "period", "amplitude", "phase", "template"}, where + ".season");
        SeasonSpec season;
        const auto kind = s.value("kind", std::string("cosine"));
        if (kind != "cosine" && kind != "random_periodic") {
            throw UsageError("synthetic spec: unknown season kind '" + kind + "'");
        }
        season.kind = kind == "cosine" ? SeasonSpec::Kind::cosine : SeasonSpec::Kind::random_periodic;
        season.period = s.value("period", season.period);
        season.amplitude = s.value("amplitude", season.amplitude);
        season.phase = s.value("phase", 0.0);
        if (s.contains("template")) season.template_ = s["template"].get<std::vector<double>>();
        spec.season = season;
    }
    if (j.contains("noise")) {
        const auto& n = j["noise"];
        check_keys(n, {"kind", "sigma", "ar_coefficient"}, where + ".noise");
        const auto kind = n.value("kind", std::string("gaussian"));
        if (kind != "gaussian" && kind != "red") throw UsageError("synthetic spec: unknown noise kind '" + kind + "'");
        spec.noise.kind = kind == "gaussian" ? NoiseSpec::Kind::gaussian : NoiseSpec::Kind::red;
        spec.noise.sigma = n.value("sigma", 0.0);
        spec.noise.ar_coefficient = n.value("ar_coefficient", 0.0);
    }
    if (j.contains("composition")) {
        const auto c = j["composition"].get<std::string>();
        if (c != "additive" && c != "multiplicative") throw UsageError("synthetic spec: unknown composition '" + c + "'");
        spec.composition = c == "additive" ? SyntheticSpec::Composition::additive
                                           : SyntheticSpec::Composition::multiplicative;
    }
    if (j.contains("transition") && !j["transition"].is_null()) {
        const auto& t = j["transition"];
        check_keys(t, {"split_index", "discontinuous", "spec"}, where + ".transition");
        if (!t.contains("spec")) throw UsageError("synthetic spec: transition needs a 'spec'");
        Transition tr;
        tr.split_index = t.value("split_index", std::size_t{0});
        tr.discontinuous = t.value("discontinuous", false);
        tr.next = std::make_shared<SyntheticSpec>(regime_from_json(t["spec"], where + ".transition.spec"));
        spec.transition = tr;
    }
    return spec;
}

}  // namespace

SyntheticSpec spec_from_json(const nlohmann::json& j) {
    try {
        return regime_from_json(j, "spec");
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("synthetic spec: ") + e.what());
    }
}

nlohmann::json to_json(const SyntheticSpec& spec) {
    nlohmann::json j;
    j["id"] = spec.id;
    j["length"] = spec.length;
    j["freq"] = std::string(to_string(spec.freq.cls));
    j["period"] = spec.freq.steps_per_cycle;
    j["start"] = format_timestamp(spec.start);
    j["trend"] = {{"kind", spec.trend.kind == TrendSpec::Kind::linear ? "linear" : "exponential"},
                  {"slope_or_rate", spec.trend.slope_or_rate},
                  {"intercept", spec.trend.intercept}};
    if (spec.season) {
        nlohmann::json s{{"kind", spec.season->kind == SeasonSpec::Kind::cosine ? "cosine" : "random_periodic"},
                         {"period", spec.season->period},
                         {"amplitude", spec.season->amplitude},
                         {"phase", spec.season->phase}};
        if (!spec.season->template_.empty()) s["template"] = spec.season->template_;
        j["season"] = s;
    } else {
        j["season"] = nullptr;
    }
    j["noise"] = {{"kind", spec.noise.kind == NoiseSpec::Kind::gaussian ? "gaussian" : "red"},
                  {"sigma", spec.noise.sigma},
                  {"ar_coefficient", spec.noise.ar_coefficient}};
    j["composition"] = spec.composition == SyntheticSpec::Composition::additive ? "additive" : "multiplicative";
    if (spec.transition) {
        j["transition"] = {{"split_index", spec.transition->split_index},
                           {"discontinuous", spec.transition->discontinuous},
                           {"spec", to_json(*spec.transition->next)}};
    }
    return j;
}

// ---------------------------------------------------------------------------
// Skill presets

const std::vector<std::string>& skill_names() {
    static const std::vector<std::string> names{
        "trend_sensitivity", "seasonality_sensitivity", "state_transition_speed", "high_entropy",
        "short_long_horizon", "long_term_memory", "intermittent",
    };
    return names;
}

std::vector<double> intermittent_values(std::size_t length, double p_zero, double lambda, Rng& rng) {
    std::bernoulli_distribution is_zero(p_zero);
    std::exponential_distribution<double> size(lambda);
    std::vector<double> out(length);
    for (double& v : out) {
        const bool zero = is_zero(rng);
        const double draw = size(rng);
        v = zero ? 0.0 : draw;
    }
    return out;
}

std::map<std::string, std::vector<TimeSeries>> skill_suite(std::uint64_t seed) {
    constexpr std::size_t kLength = 400;
    constexpr int kSeries = 5;
    std::map<std::string, std::vector<TimeSeries>> suite;

    const auto base = [&](const std::string& skill, int i, int period) {
        SyntheticSpec s;
        s.length = kLength;
        s.id = skill + "_" + std::to_string(i);
        s.freq = Frequency::of(FreqClass::day, period);
        return s;
    };
    const auto cosine = [](int period, double amplitude, double phase) {
        SeasonSpec s;
        s.period = period;
        s.amplitude = amplitude;
        s.phase = phase;
        return s;
    };
    const auto emit = [&](const std::string& skill, const SyntheticSpec& spec) {
        suite[skill].push_back(generate(spec, derive_seed(seed, spec.id)));
    };

    for (int i = 0; i < kSeries; ++i) {
        // Pure trends, no seasonality.
        auto s = base("trend_sensitivity", i, 12);
        s.trend.intercept = 200.0;
        s.trend.slope_or_rate = std::array{0.5, -0.3, 1.0, 0.2, 0.0}[static_cast<std::size_t>(i)];
        if (i == 4) {
            s.trend.kind = TrendSpec::Kind::exponential;
            s.trend.intercept = 50.0;
            s.trend.slope_or_rate = 0.004;
        }
        s.noise.sigma = 0.5;
        emit("trend_sensitivity", s);
    }
    for (int i = 0; i < kSeries; ++i) {
        // Exactly 12-periodic, noiseless.
        auto s = base("seasonality_sensitivity", i, 12);
        s.trend.intercept = 50.0;
        if (i < 3) {
            s.season = cosine(12, 5.0 + 5.0 * i, 0.7 * i);
        } else {
            SeasonSpec r;
            r.kind = SeasonSpec::Kind::random_periodic;
            r.period = 12;
            r.amplitude = 10.0;
            s.season = r;
        }
        emit("seasonality_sensitivity", s);
    }
    for (int i = 0; i < kSeries; ++i) {
        // Slope sign flips late in the series.
        auto s = base("state_transition_speed", i, 12);
        const double sign = i % 2 == 0 ? -1.0 : 1.0;
        s.trend.intercept = 150.0;
        s.trend.slope_or_rate = 0.3 * sign;
        s.season = cosine(12, 5.0, 0.0);
        s.noise.sigma = 0.5;
        auto next = std::make_shared<SyntheticSpec>(s);
        next->trend.slope_or_rate = -0.6 * sign;
        s.transition = Transition{static_cast<std::size_t>(300 + 10 * i), next, false};
        emit("state_transition_speed", s);
    }
    for (int i = 0; i < kSeries; ++i) {
        auto s = base("high_entropy", i, 12);
        s.trend.intercept = 60.0;
        s.noise.kind = i % 2 == 0 ? NoiseSpec::Kind::gaussian : NoiseSpec::Kind::red;
        s.noise.sigma = 6.0;
        s.noise.ar_coefficient = 0.5;
        s.season = cosine(12, 2.0, 0.0);
        emit("high_entropy", s);
    }
    for (int i = 0; i < kSeries; ++i) {
        auto s = base("short_long_horizon", i, 12);
        s.trend.intercept = 80.0;
        s.trend.slope_or_rate = 0.1 * (i + 1);
        s.season = cosine(12, 8.0, 0.3 * i);
        s.noise.sigma = 1.0;
        emit("short_long_horizon", s);
    }
    for (int i = 0; i < kSeries; ++i) {
        // Period far longer than any model context window.
        auto s = base("long_term_memory", i, 120);
        s.trend.intercept = 50.0;
        s.season = cosine(120, 10.0, 0.5 * i);
        s.noise.sigma = 0.5;
        emit("long_term_memory", s);
    }
    for (int i = 0; i < kSeries; ++i) {
        Rng rng = make_rng(derive_seed(seed, "intermittent_" + std::to_string(i)));
        SyntheticSpec s = base("intermittent", i, 12);
        suite["intermittent"].push_back(TimeSeries(s.id, s.freq, s.start, intermittent_values(kLength, 0.3, 1.0, rng)));
    }
    return suite;
}

}  // namespace tidecast
