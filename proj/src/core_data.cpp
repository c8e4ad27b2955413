#include "tidecast/core_data.hpp"

#include "tidecast/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace tidecast {

namespace chr = std::chrono;

std::string_view to_string(FreqClass cls) {
    switch (cls) {
        case FreqClass::minute: return "minute";
        case FreqClass::hour: return "hour";
        case FreqClass::day: return "day";
        case FreqClass::week: return "week";
        case FreqClass::month: return "month";
        case FreqClass::quarter: return "quarter";
    }
    return "day";
}

FreqClass parse_freq_class(std::string_view text) {
    static const std::map<std::string_view, FreqClass> names{
        {"minute", FreqClass::minute}, {"hour", FreqClass::hour},   {"day", FreqClass::day},
        {"week", FreqClass::week},     {"month", FreqClass::month}, {"quarter", FreqClass::quarter},
    };
    const auto it = names.find(text);
    if (it == names.end()) throw DataError("unknown frequency '" + std::string(text) + "'");
    return it->second;
}

int default_period(FreqClass cls) {
    switch (cls) {
        case FreqClass::minute: return 1440;
        case FreqClass::hour: return 24;
        case FreqClass::day: return 7;
        case FreqClass::week: return 52;
        case FreqClass::month: return 12;
        case FreqClass::quarter: return 4;
    }
    return 1;
}

// ---------------------------------------------------------------------------
// Timestamps

namespace {

bool parse_int(std::string_view s, int& out) {
    if (s.empty()) return false;
    const auto* end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, out);
    return res.ec == std::errc{} && res.ptr == end;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

bool is_monthly(FreqClass cls) { return cls == FreqClass::month || cls == FreqClass::quarter; }

std::int64_t unit_seconds(FreqClass cls) {
    switch (cls) {
        case FreqClass::minute: return 60;
        case FreqClass::hour: return 3600;
        case FreqClass::day: return 86400;
        case FreqClass::week: return 604800;
        default: return 0;
    }
}

int unit_months(FreqClass cls) { return cls == FreqClass::quarter ? 3 : 1; }

Timestamp add_months(Timestamp ts, std::int64_t months) {
    const auto day_point = chr::floor<chr::days>(ts);
    const auto time_of_day = ts - day_point;
    chr::year_month_day ymd{day_point};
    auto shifted = ymd + chr::months(months);
    if (!shifted.ok()) shifted = chr::year_month_day{shifted.year() / shifted.month() / chr::last};
    return chr::sys_days{shifted} + time_of_day;
}

}  // namespace

Timestamp parse_timestamp(std::string_view text) {
    // Accepted: YYYY-MM, YYYY-MM-DD, YYYY-MM-DD[T ]HH:MM[:SS][Z]
    auto fail = [&]() -> Timestamp { throw DataError("invalid timestamp '" + std::string(text) + "'"); };
    if (!text.empty() && text.back() == 'Z') text.remove_suffix(1);
    int y = 0, mo = 0, d = 1, h = 0, mi = 0, s = 0;
    if (text.size() < 7 || text[4] != '-') return fail();
    if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), mo)) return fail();
    if (text.size() > 7) {
        if (text.size() < 10 || text[7] != '-' || !parse_int(text.substr(8, 2), d)) return fail();
        if (text.size() > 10) {
            if (text[10] != 'T' && text[10] != ' ') return fail();
            const auto clock = text.substr(11);
            if (clock.size() != 5 && clock.size() != 8) return fail();
            if (clock[2] != ':' || !parse_int(clock.substr(0, 2), h) || !parse_int(clock.substr(3, 2), mi)) return fail();
            if (clock.size() == 8 && (clock[5] != ':' || !parse_int(clock.substr(6, 2), s))) return fail();
        }
    }
    const chr::year_month_day ymd{chr::year{y}, chr::month{static_cast<unsigned>(mo)}, chr::day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || s > 59 || h < 0 || mi < 0 || s < 0) return fail();
    return chr::sys_days{ymd} + chr::hours{h} + chr::minutes{mi} + chr::seconds{s};
}

std::string format_timestamp(Timestamp ts) {
    const auto day_point = chr::floor<chr::days>(ts);
    const chr::year_month_day ymd{day_point};
    const chr::hh_mm_ss<chr::seconds> hms{ts - day_point};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()));
    return buf;
}

Timestamp advance(Timestamp start, const Frequency& freq, std::int64_t index) {
    const std::int64_t steps = index * freq.multiple;
    if (is_monthly(freq.cls)) return add_months(start, steps * unit_months(freq.cls));
    return start + chr::seconds{steps * unit_seconds(freq.cls)};
}

// ---------------------------------------------------------------------------
// TimeSeries

TimeSeries::TimeSeries(std::string id, Frequency freq, Timestamp start, std::vector<double> values)
    : id_(std::move(id)), freq_(freq), start_(start), values_(std::move(values)) {
    if (values_.empty()) throw DataError("series '" + id_ + "' has no values");
    if (freq_.steps_per_cycle < 1) throw DataError("series '" + id_ + "' has period < 1");
    if (freq_.multiple < 1) throw DataError("series '" + id_ + "' has step multiple < 1");
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) {
            throw DataError("series '" + id_ + "' has a non-finite value at index " + std::to_string(i));
        }
    }
}

TimeSeries TimeSeries::derive(std::string id, std::vector<double> values, std::size_t offset) const {
    return TimeSeries(std::move(id), freq_, timestamp(offset), std::move(values));
}

// ---------------------------------------------------------------------------
// Calendar

CalendarFeatures calendar_features_at(Timestamp ts, const Frequency& freq) {
    const auto day_point = chr::floor<chr::days>(ts);
    const chr::year_month_day ymd{day_point};
    const chr::weekday wd{day_point};

    CalendarFeatures f;
    f.day_of_week = static_cast<int>(wd.iso_encoding()) - 1;
    f.day_of_month = static_cast<int>(static_cast<unsigned>(ymd.day()));
    f.month = static_cast<int>(static_cast<unsigned>(ymd.month()));

    // Cycle position counts whole steps from a fixed anchor: Monday
    // 1970-01-05 for sub-monthly classes, January 1970 for monthly ones.
    std::int64_t steps = 0;
    if (is_monthly(freq.cls)) {
        const std::int64_t months =
            (static_cast<int>(ymd.year()) - 1970) * 12 + static_cast<int>(static_cast<unsigned>(ymd.month())) - 1;
        steps = floor_div(months, static_cast<std::int64_t>(unit_months(freq.cls)) * freq.multiple);
    } else {
        const Timestamp anchor = chr::sys_days{chr::year{1970} / chr::January / 5};
        steps = floor_div((ts - anchor).count(), unit_seconds(freq.cls) * freq.multiple);
    }
    const std::int64_t period = freq.steps_per_cycle;
    const std::int64_t phase = ((steps % period) + period) % period;
    f.fraction_of_cycle = static_cast<double>(phase) / static_cast<double>(period);
    return f;
}

CalendarFeatures calendar_features(const TimeSeries& series, std::size_t index) {
    if (index >= series.size()) {
        throw UsageError("calendar index " + std::to_string(index) + " out of range for series of length " +
                         std::to_string(series.size()));
    }
    return calendar_features_at(series.timestamp(index), series.freq());
}

// ---------------------------------------------------------------------------
// Normalization

NormStats norm_stats(std::span<const double> values) {
    NormStats stats;
    if (values.empty()) return stats;
    const double n = static_cast<double>(values.size());
    stats.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - stats.mean) * (v - stats.mean);
    stats.std = std::max(std::sqrt(ss / n), kStdFloor);
    return stats;
}

std::vector<double> normalize(std::span<const double> values, const NormStats& stats) {
    std::vector<double> out(values.size());
    std::transform(values.begin(), values.end(), out.begin(), [&](double v) { return (v - stats.mean) / stats.std; });
    return out;
}

std::vector<double> denormalize(std::span<const double> values, const NormStats& stats) {
    std::vector<double> out(values.size());
    std::transform(values.begin(), values.end(), out.begin(), [&](double v) { return v * stats.std + stats.mean; });
    return out;
}

Normalized normalize(const TimeSeries& series) {
    Normalized out;
    out.stats = norm_stats(series.values());
    out.values = normalize(series.values(), out.stats);
    return out;
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json to_json(const TimeSeries& series) {
    nlohmann::json j;
    j["id"] = series.id();
    j["freq"] = std::string(to_string(series.freq().cls));
    j["start"] = format_timestamp(series.start());
    if (series.freq().steps_per_cycle != default_period(series.freq().cls)) j["period"] = series.freq().steps_per_cycle;
    if (series.freq().multiple != 1) j["multiple"] = series.freq().multiple;
    j["values"] = std::vector<double>(series.values().begin(), series.values().end());
    return j;
}

namespace {

// Values that parse but are not finite. Returns false for anything that is
// not a number at all (a hard parse error).
bool read_value(const nlohmann::json& v, double& out) {
    if (v.is_number()) {
        out = v.get<double>();
        return true;
    }
    if (v.is_string()) {
        const auto& s = v.get_ref<const std::string&>();
        if (s == "NaN" || s == "nan") out = std::numeric_limits<double>::quiet_NaN();
        else if (s == "Infinity" || s == "inf") out = std::numeric_limits<double>::infinity();
        else if (s == "-Infinity" || s == "-inf") out = -std::numeric_limits<double>::infinity();
        else return false;
        return true;
    }
    return false;
}

struct RawSeries {
    std::string id;
    Frequency freq;
    Timestamp start;
    std::vector<double> values;
};

RawSeries raw_from_json(const nlohmann::json& record) {
    if (!record.is_object()) throw DataError("record is not a JSON object");
    static const std::vector<std::string> allowed{"id", "freq", "start", "values", "period", "multiple"};
    for (const auto& [key, _] : record.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw DataError("unknown key '" + key + "'");
        }
    }
    for (const char* key : {"id", "freq", "start", "values"}) {
        if (!record.contains(key)) throw DataError(std::string("missing key '") + key + "'");
    }
    if (!record["id"].is_string() || !record["freq"].is_string() || !record["start"].is_string()) {
        throw DataError("id, freq and start must be strings");
    }
    RawSeries raw;
    raw.id = record["id"].get<std::string>();
    const FreqClass cls = parse_freq_class(record["freq"].get<std::string>());
    raw.freq = Frequency::of(cls);
    if (record.contains("period")) {
        if (!record["period"].is_number_integer() || record["period"].get<int>() < 1) {
            throw DataError("period must be a positive integer");
        }
        raw.freq.steps_per_cycle = record["period"].get<int>();
    }
    if (record.contains("multiple")) {
        if (!record["multiple"].is_number_integer() || record["multiple"].get<int>() < 1) {
            throw DataError("multiple must be a positive integer");
        }
        raw.freq.multiple = record["multiple"].get<int>();
    }
    raw.start = parse_timestamp(record["start"].get<std::string>());
    const auto& values = record["values"];
    if (!values.is_array() || values.empty()) throw DataError("values must be a non-empty array");
    raw.values.reserve(values.size());
    for (const auto& v : values) {
        double x = 0.0;
        if (!read_value(v, x)) throw DataError("values must be numbers");
        raw.values.push_back(x);
    }
    return raw;
}

std::optional<std::size_t> first_non_finite(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) return i;
    }
    return std::nullopt;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return lines;
}

bool blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t'; });
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

Frequency infer_frequency(Timestamp a, Timestamp b) {
    const auto da = chr::floor<chr::days>(a);
    const auto db = chr::floor<chr::days>(b);
    const chr::year_month_day ya{da}, yb{db};
    if (ya.day() == yb.day() && (a - da) == (b - db)) {
        const int months = (static_cast<int>(yb.year()) - static_cast<int>(ya.year())) * 12 +
                           static_cast<int>(static_cast<unsigned>(yb.month())) -
                           static_cast<int>(static_cast<unsigned>(ya.month()));
        if (months > 0) {
            if (months % 3 == 0) return {FreqClass::quarter, default_period(FreqClass::quarter), months / 3};
            return {FreqClass::month, default_period(FreqClass::month), months};
        }
    }
    const std::int64_t secs = (b - a).count();
    for (FreqClass cls : {FreqClass::week, FreqClass::day, FreqClass::hour, FreqClass::minute}) {
        const std::int64_t unit = unit_seconds(cls);
        if (secs > 0 && secs % unit == 0) return {cls, default_period(cls), static_cast<int>(secs / unit)};
    }
    throw DataError("cannot infer a regular frequency from timestamp spacing");
}

}  // namespace

TimeSeries series_from_json(const nlohmann::json& record) {
    RawSeries raw = raw_from_json(record);
    return TimeSeries(std::move(raw.id), raw.freq, raw.start, std::move(raw.values));
}

IngestResult parse_jsonl(std::string_view text) {
    IngestResult result;
    const auto lines = split_lines(text);
    std::size_t records = 0;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (blank(lines[i])) continue;
        ++records;
        const std::size_t line_no = i + 1;
        RawSeries raw;
        try {
            raw = raw_from_json(nlohmann::json::parse(lines[i]));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("line " + std::to_string(line_no) + ": malformed JSON record: " + e.what());
        } catch (const DataError& e) {
            throw DataError("line " + std::to_string(line_no) + ": " + e.what());
        }
        if (const auto bad = first_non_finite(raw.values)) {
            result.rejected.push_back({line_no, raw.id, "non-finite value at index " + std::to_string(*bad)});
            continue;
        }
        result.series.emplace_back(std::move(raw.id), raw.freq, raw.start, std::move(raw.values));
    }
    if (records == 0) throw DataError("empty input: no records found");
    return result;
}

IngestResult parse_csv(std::string_view text) {
    struct Rows {
        std::size_t first_line = 0;
        std::vector<Timestamp> times;
        std::vector<double> values;
    };
    const auto lines = split_lines(text);
    std::size_t i = 0;
    while (i < lines.size() && blank(lines[i])) ++i;
    if (i == lines.size()) throw DataError("empty input: no records found");
    if (trim(lines[i]) != "id,timestamp,value") {
        throw DataError("line " + std::to_string(i + 1) + ": expected header 'id,timestamp,value'");
    }

    std::vector<std::string> order;
    std::map<std::string, Rows> groups;
    for (++i; i < lines.size(); ++i) {
        if (blank(lines[i])) continue;
        const std::size_t line_no = i + 1;
        const auto where = [&](const std::string& msg) { return DataError("line " + std::to_string(line_no) + ": " + msg); };
        const auto line = lines[i];
        const auto c1 = line.find(',');
        const auto c2 = c1 == std::string_view::npos ? c1 : line.find(',', c1 + 1);
        if (c2 == std::string_view::npos || line.find(',', c2 + 1) != std::string_view::npos) {
            throw where("expected 3 comma-separated fields");
        }
        const std::string id(trim(line.substr(0, c1)));
        if (id.empty()) throw where("empty id");
        Timestamp ts;
        try {
            ts = parse_timestamp(trim(line.substr(c1 + 1, c2 - c1 - 1)));
        } catch (const DataError& e) {
            throw where(e.what());
        }
        const std::string value_text(trim(line.substr(c2 + 1)));
        char* end = nullptr;
        const double value = std::strtod(value_text.c_str(), &end);
        if (value_text.empty() || end != value_text.c_str() + value_text.size()) {
            throw where("value '" + value_text + "' is not a number");
        }
        auto [it, inserted] = groups.try_emplace(id);
        if (inserted) {
            order.push_back(id);
            it->second.first_line = line_no;
        }
        if (!it->second.times.empty() && ts <= it->second.times.back()) {
            throw where("timestamps for '" + id + "' are not strictly increasing");
        }
        it->second.times.push_back(ts);
        it->second.values.push_back(value);
    }
    if (order.empty()) throw DataError("empty input: no records found");

    IngestResult result;
    for (const auto& id : order) {
        auto& rows = groups[id];
        Frequency freq = rows.times.size() > 1 ? infer_frequency(rows.times[0], rows.times[1]) : Frequency::of(FreqClass::day);
        for (std::size_t k = 0; k < rows.times.size(); ++k) {
            if (advance(rows.times[0], freq, static_cast<std::int64_t>(k)) != rows.times[k]) {
                throw DataError("line " + std::to_string(rows.first_line) + ": series '" + id +
                                "' is not regularly spaced");
            }
        }
        if (const auto bad = first_non_finite(rows.values)) {
            result.rejected.push_back({rows.first_line, id, "non-finite value at index " + std::to_string(*bad)});
            continue;
        }
        result.series.emplace_back(id, freq, rows.times[0], std::move(rows.values));
    }
    return result;
}

IngestResult ingest(const std::filesystem::path& path, FileFormat format) {
    if (!std::filesystem::exists(path)) throw DataError("input file not found: '" + path.string() + "'");
    const std::string text = read_file(path);
    try {
        return format == FileFormat::jsonl ? parse_jsonl(text) : parse_csv(text);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

IngestResult ingest(const std::filesystem::path& path) {
    return ingest(path, path.extension() == ".csv" ? FileFormat::csv : FileFormat::jsonl);
}

std::string to_jsonl(std::span<const TimeSeries> series) {
    std::string out;
    for (const auto& s : series) {
        out += to_json(s).dump();
        out += '\n';
    }
    return out;
}

void write_jsonl(const std::filesystem::path& path, std::span<const TimeSeries> series) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << to_jsonl(series);
}

std::vector<Dataset> load_dataset_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw DataError("dataset directory not found: '" + dir.string() + "'");
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const auto ext = entry.path().extension();
        if (entry.is_regular_file() && (ext == ".jsonl" || ext == ".csv")) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no .jsonl or .csv files in '" + dir.string() + "'");
    std::vector<Dataset> datasets;
    for (const auto& f : files) {
        auto result = ingest(f);
        datasets.push_back({f.stem().string(), std::move(result.series)});
    }
    return datasets;
}

}  // namespace tidecast
