#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tidecast/core_data.hpp"

namespace tidecast {

// Location-scale Student-T predictive distribution of one future value.
struct StudentT {
    double nu = 3.0;
    double mu = 0.0;
    double sigma = 1.0;
};

// Anything that maps a history to a point forecast. Implementations are
// immutable after construction (or after fit) and safe to call concurrently.
class Forecaster {
public:
    virtual ~Forecaster() = default;

    virtual std::string kind() const = 0;

    // Returns exactly `horizon` values.
    virtual std::vector<double> predict(std::span<const double> history, std::size_t horizon) const = 0;

    // Score in (0, 1]; higher means the model expects to be accurate on this
    // history. The default scores the member's own one-step errors over the
    // tail of the history: 1 / (1 + rms_error / (robust_scale + 1e-8)).
    virtual double confidence(std::span<const double> history, std::size_t horizon) const;

    // Variants that see timestamps and frequency. Models that use calendar
    // information override these; the defaults forward to the value-only calls.
    virtual std::vector<double> predict_series(const TimeSeries& history, std::size_t horizon) const {
        return predict(history.values(), horizon);
    }
    virtual double confidence_series(const TimeSeries& history, std::size_t horizon) const;

    virtual std::optional<std::vector<StudentT>> predict_distribution(std::span<const double> history,
                                                                      std::size_t horizon) const {
        (void)history;
        (void)horizon;
        return std::nullopt;
    }

    virtual std::unique_ptr<Forecaster> clone() const = 0;

    // Member description for pool files.
    virtual nlohmann::json describe() const = 0;
};

}  // namespace tidecast
