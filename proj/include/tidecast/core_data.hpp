#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace tidecast {

using Timestamp = std::chrono::sys_seconds;

enum class FreqClass { minute, hour, day, week, month, quarter };

std::string_view to_string(FreqClass cls);
FreqClass parse_freq_class(std::string_view text);

// Default seasonal period, in steps, for each class:
// minute 1440, hour 24, day 7, week 52, month 12, quarter 4.
int default_period(FreqClass cls);

// Sampling frequency of a series. `multiple` is the number of class units
// between consecutive observations (5-minute data is {minute, multiple 5});
// it is 1 for everything that was not produced by frequency aggregation.
struct Frequency {
    FreqClass cls = FreqClass::day;
    int steps_per_cycle = 7;
    int multiple = 1;

    static Frequency of(FreqClass cls) { return {cls, default_period(cls), 1}; }
    static Frequency of(FreqClass cls, int period) { return {cls, period, 1}; }

    friend bool operator==(const Frequency&, const Frequency&) = default;
};

Timestamp parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp ts);

// Timestamp of observation `index` for a series starting at `start`.
Timestamp advance(Timestamp start, const Frequency& freq, std::int64_t index);

// Univariate, regularly spaced, finite-valued series. Immutable once built;
// the constructor enforces the invariants.
class TimeSeries {
public:
    TimeSeries(std::string id, Frequency freq, Timestamp start, std::vector<double> values);

    const std::string& id() const { return id_; }
    const Frequency& freq() const { return freq_; }
    Timestamp start() const { return start_; }
    std::span<const double> values() const { return values_; }
    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }

    Timestamp timestamp(std::size_t index) const { return advance(start_, freq_, static_cast<std::int64_t>(index)); }

    // Same metadata, new id/values. Start is shifted by `offset` steps.
    TimeSeries derive(std::string id, std::vector<double> values, std::size_t offset = 0) const;

    friend bool operator==(const TimeSeries&, const TimeSeries&) = default;

private:
    std::string id_;
    Frequency freq_;
    Timestamp start_;
    std::vector<double> values_;
};

struct CalendarFeatures {
    int day_of_week = 0;   // 0 = Monday
    int day_of_month = 1;  // 1..31
    int month = 1;         // 1..12
    double fraction_of_cycle = 0.0;  // [0, 1)

    friend bool operator==(const CalendarFeatures&, const CalendarFeatures&) = default;
};

CalendarFeatures calendar_features(const TimeSeries& series, std::size_t index);
CalendarFeatures calendar_features_at(Timestamp ts, const Frequency& freq);

struct NormStats {
    double mean = 0.0;
    double std = 1.0;
};

inline constexpr double kStdFloor = 1e-8;

NormStats norm_stats(std::span<const double> values);
std::vector<double> normalize(std::span<const double> values, const NormStats& stats);
std::vector<double> denormalize(std::span<const double> values, const NormStats& stats);

struct Normalized {
    std::vector<double> values;
    NormStats stats;
};
Normalized normalize(const TimeSeries& series);

enum class FileFormat { jsonl, csv };

struct RecordError {
    std::size_t line = 0;  // 1-based
    std::string record;    // series id, when known
    std::string message;
};

struct IngestResult {
    std::vector<TimeSeries> series;
    std::vector<RecordError> rejected;
};

// Parses JSONL (one series per line) or long-format CSV (id,timestamp,value).
// Malformed records throw DataError naming the line; records that parse but
// carry non-finite values are reported in `rejected` and skipped.
IngestResult ingest(const std::filesystem::path& path, FileFormat format);
IngestResult ingest(const std::filesystem::path& path);  // format from extension
IngestResult parse_jsonl(std::string_view text);
IngestResult parse_csv(std::string_view text);

nlohmann::json to_json(const TimeSeries& series);
TimeSeries series_from_json(const nlohmann::json& record);

std::string to_jsonl(std::span<const TimeSeries> series);
void write_jsonl(const std::filesystem::path& path, std::span<const TimeSeries> series);

// Every *.jsonl / *.csv file in `dir`, sorted by file name; the file stem is
// the dataset id.
struct Dataset {
    std::string id;
    std::vector<TimeSeries> series;
};
std::vector<Dataset> load_dataset_dir(const std::filesystem::path& dir);

}  // namespace tidecast
