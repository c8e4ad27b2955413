#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tidecast/core_data.hpp"
#include "tidecast/rng.hpp"

namespace tidecast {

struct TrendSpec {
    enum class Kind { linear, exponential };
    Kind kind = Kind::linear;
    double slope_or_rate = 0.0;
    double intercept = 0.0;
};

struct SeasonSpec {
    enum class Kind { cosine, random_periodic };
    Kind kind = Kind::cosine;
    int period = 12;
    double amplitude = 1.0;
    double phase = 0.0;             // cosine only
    std::vector<double> template_;  // random_periodic; drawn from the seed when empty
};

struct NoiseSpec {
    enum class Kind { gaussian, red };
    Kind kind = Kind::gaussian;
    double sigma = 0.0;
    double ar_coefficient = 0.0;  // red only, in (-1, 1)
};

struct SyntheticSpec;

struct Transition {
    std::size_t split_index = 0;
    std::shared_ptr<const SyntheticSpec> next;
    bool discontinuous = false;
};

struct SyntheticSpec {
    enum class Composition { additive, multiplicative };

    std::size_t length = 100;
    TrendSpec trend;
    std::optional<SeasonSpec> season;
    NoiseSpec noise;
    Composition composition = Composition::additive;
    std::optional<Transition> transition;

    // Output metadata.
    std::string id = "sim";
    Frequency freq = Frequency::of(FreqClass::day);
    Timestamp start = parse_timestamp("2020-01-01");
};

// Throws UsageError naming the offending field.
void validate(const SyntheticSpec& spec);

// additive:       y = trend + season + noise
// multiplicative: y = trend * (1 + season / max(|trend|, 1)) * (1 + noise)
// With a transition, points from split_index onward come from the second
// spec (evaluated on the same global time axis) shifted so the noiseless
// paths meet at the splice, unless the transition is discontinuous.
TimeSeries generate(const SyntheticSpec& spec, std::uint64_t seed);

SyntheticSpec spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SyntheticSpec& spec);

// Skill names, in report order.
const std::vector<std::string>& skill_names();

// Deterministic presets for the forecasting-skill probe suite; each skill
// maps to 5 series of length 400.
std::map<std::string, std::vector<TimeSeries>> skill_suite(std::uint64_t seed);

// Intermittent demand: each point is 0 with probability p_zero, otherwise an
// Exponential(lambda) draw.
std::vector<double> intermittent_values(std::size_t length, double p_zero, double lambda, Rng& rng);

}  // namespace tidecast
