#include "tidecast/eval.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "tidecast/error.hpp"
#include "tidecast/simulate.hpp"
#include "tidecast/tsfm.hpp"

namespace tidecast {

namespace {

void check_lengths(std::span<const double> truth, std::span<const double> forecast) {
    if (truth.empty()) throw UsageError("metric: empty input");
    if (truth.size() != forecast.size()) throw UsageError("metric: truth and forecast lengths differ");
}

struct AbsSums {
    double err = 0.0;
    double truth = 0.0;
};

AbsSums abs_sums(std::span<const double> truth, std::span<const double> forecast) {
    check_lengths(truth, forecast);
    AbsSums s;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        s.err += std::abs(truth[i] - forecast[i]);
        s.truth += std::abs(truth[i]);
    }
    return s;
}

bool all_zero(std::span<const double> v) {
    for (double x : v)
        if (x != 0.0) return false;
    return true;
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

MapeResult mape_detailed(std::span<const double> truth, std::span<const double> forecast) {
    check_lengths(truth, forecast);
    MapeResult r;
    double total = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] == 0.0) {
            ++r.skipped;
            continue;
        }
        total += std::abs((truth[i] - forecast[i]) / truth[i]);
        ++r.used;
    }
    if (r.used == 0) throw UsageError("mape: every truth value is zero");
    r.value = total / static_cast<double>(r.used);
    return r;
}

double mape(std::span<const double> truth, std::span<const double> forecast) {
    return mape_detailed(truth, forecast).value;
}

double wmape(std::span<const double> truth, std::span<const double> forecast) {
    const AbsSums s = abs_sums(truth, forecast);
    if (!(s.truth > 0.0)) throw UsageError("wmape: truth is all zero");
    return s.err / s.truth;
}

double fa(std::span<const double> truth, std::span<const double> forecast) { return 1.0 - wmape(truth, forecast); }

const MetricRow* MetricReport::find(const std::string& model, const std::string& dataset) const {
    for (const auto& r : rows)
        if (r.model == model && r.dataset == dataset) return &r;
    return nullptr;
}

MetricReport rolling_benchmark(std::span<const NamedModel> models, const DatasetMap& datasets,
                               const BenchmarkOptions& options) {
    if (options.horizon == 0) throw UsageError("benchmark: horizon must be >= 1");
    if (options.n_origins == 0) throw UsageError("benchmark: need at least one origin");
    if (options.step == 0 && options.n_origins > 1) throw UsageError("benchmark: step must be >= 1");
    const std::size_t h = options.horizon;
    const std::size_t need = std::max<std::size_t>(options.min_context, 1) + h + (options.n_origins - 1) * options.step;
    MetricReport report;
    for (const auto& [dname, series] : datasets) {
        std::vector<const TimeSeries*> usable;
        for (const auto& s : series) {
            if (s.size() < need) {
                report.warnings.push_back("dataset '" + dname + "': series '" + s.id() + "' has " +
                                          std::to_string(s.size()) + " points, needs " + std::to_string(need));
                continue;
            }
            usable.push_back(&s);
        }
        if (usable.empty()) {
            report.warnings.push_back("dataset '" + dname + "' skipped: no series long enough");
            continue;
        }
        for (const auto& nm : models) {
            if (!nm.model) throw UsageError("benchmark: null model '" + nm.name + "'");
            MetricRow row;
            row.model = nm.name;
            row.dataset = dname;
            std::vector<double> s_mape, s_wmape, s_nll, s_conf;
            for (const TimeSeries* sp : usable) {
                const TimeSeries& s = *sp;
                const auto vals = s.values();
                std::vector<double> w_mape, w_wmape, w_nll, w_conf;
                for (std::size_t j = 0; j < options.n_origins; ++j) {
                    const std::size_t cut = s.size() - h - j * options.step;
                    const auto truth = vals.subspan(cut, h);
                    if (all_zero(truth)) {
                        ++row.skipped_windows;
                        continue;
                    }
                    const TimeSeries prefix = s.derive(s.id(), std::vector<double>(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(cut)));
                    const std::vector<double> f = nm.model->predict_series(prefix, h);
                    if (f.size() != h) throw NumericError("model '" + nm.name + "' returned the wrong horizon");
                    for (double v : f)
                        if (!std::isfinite(v)) throw NumericError("model '" + nm.name + "' produced a non-finite forecast");
                    w_wmape.push_back(wmape(truth, f));
                    const MapeResult m = mape_detailed(truth, f);
                    w_mape.push_back(m.value);
                    row.mape_skipped_points += m.skipped;
                    if (auto dist = nm.model->predict_distribution(prefix.values(), h)) {
                        double nll = 0.0;
                        for (std::size_t k = 0; k < h; ++k) nll += tsfm::student_t_nll(truth[k], (*dist)[k]);
                        w_nll.push_back(nll / static_cast<double>(h));
                    }
                    if (options.with_confidence) w_conf.push_back(nm.model->confidence_series(prefix, h));
                    ++row.windows;
                }
                if (w_wmape.empty()) continue;
                s_wmape.push_back(mean(w_wmape));
                s_mape.push_back(mean(w_mape));
                if (!w_nll.empty()) s_nll.push_back(mean(w_nll));
                if (!w_conf.empty()) s_conf.push_back(mean(w_conf));
                ++row.series;
            }
            if (row.series == 0) {
                report.warnings.push_back("dataset '" + dname + "': no scorable windows for model '" + nm.name + "'");
                continue;
            }
            row.wmape = mean(s_wmape);
            row.fa = 1.0 - row.wmape;
            row.mape = mean(s_mape);
            row.one_minus_mape = 1.0 - row.mape;
            if (options.clamp_one_minus_mape) row.one_minus_mape = std::max(row.one_minus_mape, 0.0);
            if (!s_nll.empty()) row.mean_nll = mean(s_nll);
            if (!s_conf.empty()) row.mean_confidence = mean(s_conf);
            report.rows.push_back(std::move(row));
        }
    }
    return report;
}

std::vector<SkillRow> skill_report(const Forecaster& model, std::uint64_t seed, const SkillOptions& options) {
    const auto suite = skill_suite(seed);
    const NamedModel nm{"model", &model};
    std::vector<SkillRow> out;
    for (const auto& skill : skill_names()) {
        DatasetMap dm{{skill, suite.at(skill)}};
        BenchmarkOptions bo;
        bo.horizon = options.horizon;
        bo.n_origins = options.n_origins;
        SkillRow row;
        row.skill = skill;
        const MetricReport r = rolling_benchmark({&nm, 1}, dm, bo);
        if (r.rows.empty()) throw DataError("skill '" + skill + "' produced no windows");
        row.fa = r.rows[0].fa;
        row.windows = r.rows[0].windows;
        if (skill == "short_long_horizon") {
            bo.horizon = 4 * options.horizon;
            const MetricReport lr = rolling_benchmark({&nm, 1}, dm, bo);
            if (lr.rows.empty()) throw DataError("skill '" + skill + "' produced no long-horizon windows");
            row.fa = 0.5 * (row.fa + lr.rows[0].fa);
            row.windows += lr.rows[0].windows;
        }
        out.push_back(row);
    }
    return out;
}

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string report_csv(const MetricReport& report) {
    std::ostringstream os;
    os << "model,dataset,series,windows,mape,one_minus_mape,wmape,fa,mean_nll,mean_confidence,mape_skipped_points,"
          "skipped_windows\n";
    for (const auto& r : report.rows) {
        os << r.model << ',' << r.dataset << ',' << r.series << ',' << r.windows << ',' << format_number(r.mape) << ','
           << format_number(r.one_minus_mape) << ',' << format_number(r.wmape) << ',' << format_number(r.fa) << ','
           << (r.mean_nll ? format_number(*r.mean_nll) : "") << ','
           << (r.mean_confidence ? format_number(*r.mean_confidence) : "") << ',' << r.mape_skipped_points << ','
           << r.skipped_windows << '\n';
    }
    return os.str();
}

nlohmann::json report_json(const MetricReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : report.rows) {
        nlohmann::json j = {{"model", r.model},
                            {"dataset", r.dataset},
                            {"series", r.series},
                            {"windows", r.windows},
                            {"mape", r.mape},
                            {"one_minus_mape", r.one_minus_mape},
                            {"wmape", r.wmape},
                            {"fa", r.fa},
                            {"mape_skipped_points", r.mape_skipped_points},
                            {"skipped_windows", r.skipped_windows}};
        if (r.mean_nll) j["mean_nll"] = *r.mean_nll;
        if (r.mean_confidence) j["mean_confidence"] = *r.mean_confidence;
        rows.push_back(std::move(j));
    }
    return {{"rows", rows}, {"warnings", report.warnings}};
}

std::string skill_csv(const std::vector<SkillRow>& rows) {
    std::ostringstream os;
    os << "skill,fa,windows\n";
    for (const auto& r : rows) os << r.skill << ',' << format_number(r.fa) << ',' << r.windows << '\n';
    return os.str();
}

}  // namespace tidecast
