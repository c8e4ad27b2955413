#include "tidecast/augment.hpp"

#include "tidecast/error.hpp"
#include "tidecast/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace tidecast {

// ---------------------------------------------------------------------------
// Frequency aggregation

Frequency aggregated_frequency(const Frequency& freq, int factor) {
    const std::int64_t units = static_cast<std::int64_t>(freq.multiple) * factor;
    Frequency out = freq;
    if (freq.cls == FreqClass::month || freq.cls == FreqClass::quarter) {
        const std::int64_t months = units * (freq.cls == FreqClass::quarter ? 3 : 1);
        out.cls = months % 3 == 0 ? FreqClass::quarter : FreqClass::month;
        out.multiple = static_cast<int>(out.cls == FreqClass::quarter ? months / 3 : months);
    } else {
        constexpr std::pair<FreqClass, std::int64_t> units_s[] = {
            {FreqClass::week, 604800}, {FreqClass::day, 86400}, {FreqClass::hour, 3600}, {FreqClass::minute, 60}};
        std::int64_t base = 60;
        for (const auto& [cls, secs] : units_s) {
            if (cls == freq.cls) base = secs;
        }
        const std::int64_t total = units * base;
        for (const auto& [cls, secs] : units_s) {
            if (total % secs == 0) {
                out.cls = cls;
                out.multiple = static_cast<int>(total / secs);
                break;
            }
        }
    }
    if (out.cls != freq.cls) {
        out.steps_per_cycle = std::max(1, default_period(out.cls) / out.multiple);
    } else {
        out.steps_per_cycle = std::max(1, freq.steps_per_cycle / factor);
    }
    return out;
}

TimeSeries frequency_aggregate(const TimeSeries& series, int factor, AggregateMode mode) {
    if (factor < 2) throw UsageError("frequency_aggregate: factor must be at least 2");
    const auto f = static_cast<std::size_t>(factor);
    if (f > series.size()) {
        throw UsageError("frequency_aggregate: factor " + std::to_string(factor) + " exceeds series length " +
                         std::to_string(series.size()));
    }
    const auto values = series.values();
    std::vector<double> out(series.size() / f);
    for (std::size_t j = 0; j < out.size(); ++j) {
        const double s = std::accumulate(values.begin() + static_cast<std::ptrdiff_t>(j * f),
                                         values.begin() + static_cast<std::ptrdiff_t>((j + 1) * f), 0.0);
        out[j] = mode == AggregateMode::sum ? s : s / static_cast<double>(f);
    }
    return TimeSeries(series.id(), aggregated_frequency(series.freq(), factor), series.start(), std::move(out));
}

// ---------------------------------------------------------------------------
// MBB

MbbResult mbb_augment_detailed(const TimeSeries& series, int period, std::size_t block_len, int n_variants,
                               std::uint64_t seed) {
    if (block_len == 0) block_len = 2 * static_cast<std::size_t>(std::max(period, 1));
    if (block_len < 2) throw UsageError("mbb: block length must be at least 2");
    if (n_variants < 0) throw UsageError("mbb: variant count must be non-negative");

    MbbResult result;
    result.decomposition = stl_decompose(series, period);
    const auto& d = result.decomposition;
    const std::size_t n = series.size();
    block_len = std::min(block_len, n);
    result.block_len = block_len;
    const std::size_t n_blocks = (n + block_len - 1) / block_len;

    for (int v = 0; v < n_variants; ++v) {
        Rng rng = make_rng(derive_seed(seed, static_cast<std::uint64_t>(v)));
        std::uniform_int_distribution<std::size_t> pick(0, n - block_len);
        MbbVariant variant{series, {}};
        std::vector<double> values;
        values.reserve(n_blocks * block_len);
        for (std::size_t b = 0; b < n_blocks; ++b) {
            const std::size_t start = pick(rng);
            variant.block_starts.push_back(start);
            values.insert(values.end(), d.residual.begin() + static_cast<std::ptrdiff_t>(start),
                          d.residual.begin() + static_cast<std::ptrdiff_t>(start + block_len));
        }
        values.resize(n);
        for (std::size_t t = 0; t < n; ++t) values[t] += d.trend[t] + d.seasonal[t];
        variant.series = series.derive(series.id() + "_mbb" + std::to_string(v), std::move(values));
        result.variants.push_back(std::move(variant));
    }
    return result;
}

std::vector<TimeSeries> mbb_augment(const TimeSeries& series, int period, std::size_t block_len, int n_variants,
                                    std::uint64_t seed) {
    auto result = mbb_augment_detailed(series, period, block_len, n_variants, seed);
    std::vector<TimeSeries> out;
    out.reserve(result.variants.size());
    for (auto& v : result.variants) out.push_back(std::move(v.series));
    return out;
}

// ---------------------------------------------------------------------------
// DTW

DtwResult dtw(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw UsageError("dtw: inputs must be non-empty");
    const std::size_t n = a.size(), m = b.size();
    constexpr double inf = std::numeric_limits<double>::infinity();
    // acc[(i+1)*(m+1) + (j+1)] is the optimal cost of aligning a[0..i], b[0..j].
    std::vector<double> acc((n + 1) * (m + 1), inf);
    const auto at = [&](std::size_t i, std::size_t j) -> double& { return acc[i * (m + 1) + j]; };
    at(0, 0) = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            const double d = (a[i - 1] - b[j - 1]) * (a[i - 1] - b[j - 1]);
            at(i, j) = d + std::min({at(i - 1, j - 1), at(i - 1, j), at(i, j - 1)});
        }
    }
    DtwResult result;
    result.cost = at(n, m);
    std::size_t i = n, j = m;
    while (true) {
        result.path.emplace_back(i - 1, j - 1);
        if (i == 1 && j == 1) break;
        const double diag = at(i - 1, j - 1), up = at(i - 1, j), left = at(i, j - 1);
        if (diag <= up && diag <= left) {
            --i;
            --j;
        } else if (up <= left) {
            --i;
        } else {
            --j;
        }
    }
    std::reverse(result.path.begin(), result.path.end());
    return result;
}

double dtw_cost(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw UsageError("dtw: inputs must be non-empty");
    const std::size_t m = b.size();
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
    prev[0] = 0.0;
    for (double ai : a) {
        cur[0] = inf;
        for (std::size_t j = 1; j <= m; ++j) {
            const double d = (ai - b[j - 1]) * (ai - b[j - 1]);
            cur[j] = d + std::min({prev[j - 1], prev[j], cur[j - 1]});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

// ---------------------------------------------------------------------------
// DBA

namespace {

double dba_objective(std::span<const std::vector<double>> series, std::span<const double> center) {
    double total = 0.0;
    for (const auto& s : series) total += dtw_cost(center, s);
    return total;
}

}  // namespace

DbaResult dba_detailed(std::span<const std::vector<double>> series, std::span<const double> init, int max_iters,
                       double tol) {
    if (series.empty()) throw UsageError("dba: no series to average");
    if (init.empty()) throw UsageError("dba: empty initial barycenter");
    for (const auto& s : series) {
        if (s.empty()) throw UsageError("dba: empty member series");
    }

    DbaResult result;
    result.barycenter.assign(init.begin(), init.end());
    result.objective.push_back(dba_objective(series, result.barycenter));

    const std::size_t len = init.size();
    std::vector<double> sums(len), counts(len);
    for (int iter = 0; iter < max_iters; ++iter) {
        const double current = result.objective.back();
        if (current == 0.0) break;
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0.0);
        for (const auto& s : series) {
            for (const auto& [i, j] : dtw(result.barycenter, s).path) {
                sums[i] += s[j];
                counts[i] += 1.0;
            }
        }
        std::vector<double> next(len);
        for (std::size_t i = 0; i < len; ++i) next[i] = sums[i] / counts[i];
        const double updated = dba_objective(series, next);
        if (!(updated < current)) break;
        result.barycenter = std::move(next);
        result.objective.push_back(updated);
        result.iterations = iter + 1;
        if ((current - updated) / current < tol) break;
    }
    return result;
}

std::vector<double> dba(std::span<const std::vector<double>> series, std::span<const double> init, int max_iters,
                        double tol) {
    return dba_detailed(series, init, max_iters, tol).barycenter;
}

// ---------------------------------------------------------------------------
// k-shape

std::vector<double> z_normalize(std::span<const double> values) {
    const NormStats stats = norm_stats(values);
    if (stats.std <= kStdFloor) return std::vector<double>(values.size(), 0.0);
    return normalize(values, stats);
}

ShiftMatch best_shift(std::span<const double> a, std::span<const double> b) {
    const double norm = std::sqrt(kernels::dot(a, a) * kernels::dot(b, b));
    ShiftMatch best{0, 0.0};
    if (norm <= 0.0) return best;
    const long n = static_cast<long>(a.size());
    const long m = static_cast<long>(b.size());
    bool first = true;
    // cc(s) = sum_i a[i] * b[i - s]; order lags by |s| so ties keep the smallest shift.
    for (long mag = 0; mag < std::max(n, m); ++mag) {
        for (long s : {mag, -mag}) {
            if (mag == 0 && s < 0) continue;
            const long lo = std::max(0L, s);
            const long hi = std::min(n, m + s);
            if (hi <= lo) continue;
            const double cc = kernels::dot(a.subspan(static_cast<std::size_t>(lo), static_cast<std::size_t>(hi - lo)),
                                           b.subspan(static_cast<std::size_t>(lo - s), static_cast<std::size_t>(hi - lo)));
            const double ncc = cc / norm;
            if (first || ncc > best.ncc) {
                best = {s, ncc};
                first = false;
            }
        }
    }
    return best;
}

double sbd(std::span<const double> a, std::span<const double> b) {
    const auto za = z_normalize(a);
    const auto zb = z_normalize(b);
    return 1.0 - best_shift(za, zb).ncc;
}

namespace {

std::vector<double> shifted(std::span<const double> b, long s, std::size_t len) {
    std::vector<double> out(len, 0.0);
    for (long i = 0; i < static_cast<long>(len); ++i) {
        const long src = i - s;
        if (src >= 0 && src < static_cast<long>(b.size())) out[static_cast<std::size_t>(i)] = b[static_cast<std::size_t>(src)];
    }
    return out;
}

double sbd_normalized(std::span<const double> za, std::span<const double> zb) { return 1.0 - best_shift(za, zb).ncc; }

}  // namespace

ClusterAssignment kshape_cluster(std::span<const std::vector<double>> series, int k, std::uint64_t seed, int max_iters) {
    const std::size_t n = series.size();
    if (k < 1) throw UsageError("kshape: k must be positive");
    if (static_cast<std::size_t>(k) > n) {
        throw UsageError("kshape: k = " + std::to_string(k) + " exceeds series count " + std::to_string(n));
    }
    std::size_t len = std::numeric_limits<std::size_t>::max();
    for (const auto& s : series) len = std::min(len, s.size());
    if (len < 2) throw UsageError("kshape: series need at least 2 points");

    std::vector<std::vector<double>> z(n);
    for (std::size_t i = 0; i < n; ++i) {
        z[i] = z_normalize(std::span<const double>(series[i]).last(len));
    }

    Rng rng = make_rng(seed);
    ClusterAssignment out;
    // SBD-weighted seeding: first centroid uniform, then proportional to the
    // squared distance to the nearest chosen centroid.
    std::vector<std::size_t> chosen{std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)};
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    while (chosen.size() < static_cast<std::size_t>(k)) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            nearest[i] = std::min(nearest[i], sbd_normalized(z[chosen.back()], z[i]));
            if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) nearest[i] = 0.0;
            total += nearest[i] * nearest[i];
        }
        std::size_t pick = n;
        if (total > 0.0) {
            double r = std::uniform_real_distribution<double>(0.0, total)(rng);
            for (std::size_t i = 0; i < n; ++i) {
                r -= nearest[i] * nearest[i];
                if (r < 0.0 && nearest[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
        }
        if (pick == n) {
            for (std::size_t i = 0; i < n && pick == n; ++i) {
                if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) pick = i;
            }
        }
        chosen.push_back(pick);
    }
    for (std::size_t c : chosen) out.centroids.push_back(z[c]);

    std::vector<int> labels(n, -1);
    std::vector<double> dist(n);
    for (int iter = 0; iter < std::max(max_iters, 1); ++iter) {
        std::vector<int> next(n);
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                const double d = sbd_normalized(out.centroids[static_cast<std::size_t>(c)], z[i]);
                if (d < best) {
                    best = d;
                    next[i] = c;
                }
            }
            dist[i] = best;
        }
        // Refill empty clusters with the worst-fitting member of a cluster
        // that can spare one.
        for (int c = 0; c < k; ++c) {
            if (std::count(next.begin(), next.end(), c) > 0) continue;
            std::size_t worst = n;
            for (std::size_t i = 0; i < n; ++i) {
                if (std::count(next.begin(), next.end(), next[i]) < 2) continue;
                if (worst == n || dist[i] > dist[worst]) worst = i;
            }
            next[worst] = c;
            dist[worst] = 0.0;
            out.centroids[static_cast<std::size_t>(c)] = z[worst];
        }
        out.iterations = iter + 1;
        const bool converged = next == labels;
        labels = std::move(next);
        if (converged) break;

        for (int c = 0; c < k; ++c) {
            auto& centroid = out.centroids[static_cast<std::size_t>(c)];
            std::vector<double> acc(len, 0.0);
            std::size_t members = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (labels[i] != c) continue;
                const auto match = best_shift(centroid, z[i]);
                kernels::axpy(1.0, shifted(z[i], match.shift, len), acc);
                ++members;
            }
            for (double& v : acc) v /= static_cast<double>(members);
            auto updated = z_normalize(acc);
            if (std::any_of(updated.begin(), updated.end(), [](double v) { return v != 0.0; })) centroid = std::move(updated);
        }
    }
    out.labels = std::move(labels);
    return out;
}

ClusterAssignment kshape_cluster(std::span<const TimeSeries> series, int k, std::uint64_t seed, int max_iters) {
    std::vector<std::vector<double>> raw;
    raw.reserve(series.size());
    for (const auto& s : series) raw.emplace_back(s.values().begin(), s.values().end());
    return kshape_cluster(std::span<const std::vector<double>>(raw), k, seed, max_iters);
}

std::vector<TimeSeries> dba_augment(std::span<const TimeSeries> series, int k, int per_cluster, std::uint64_t seed,
                                    int dba_iters) {
    if (per_cluster < 0) throw UsageError("dba_augment: per_cluster must be non-negative");
    const auto clusters = kshape_cluster(series, k, derive_seed(seed, "kshape"));
    std::vector<TimeSeries> out;
    if (per_cluster == 0) return out;

    for (int c = 0; c < k; ++c) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < series.size(); ++i) {
            if (clusters.labels[i] == c) members.push_back(i);
        }
        std::vector<std::vector<double>> raw;
        for (std::size_t i : members) raw.emplace_back(series[i].values().begin(), series[i].values().end());

        // Medoid under DTW cost.
        std::size_t medoid = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < raw.size(); ++a) {
            double total = 0.0;
            for (std::size_t b = 0; b < raw.size(); ++b) {
                if (a != b) total += dtw_cost(raw[a], raw[b]);
            }
            if (total < best) {
                best = total;
                medoid = a;
            }
        }

        Rng rng = make_rng(derive_seed(seed, "dba-cluster-" + std::to_string(c)));
        std::uniform_int_distribution<std::size_t> pick(0, raw.size() - 1);
        const TimeSeries& base = series[members[medoid]];
        for (int v = 0; v < per_cluster; ++v) {
            std::vector<std::vector<double>> sample;
            sample.reserve(raw.size());
            for (std::size_t s = 0; s < raw.size(); ++s) sample.push_back(raw[pick(rng)]);
            auto center = dba(sample, raw[medoid], dba_iters, 1e-4);
            out.push_back(base.derive(base.id() + "_dba" + std::to_string(c) + "_" + std::to_string(v), std::move(center)));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Mixup

std::vector<double> sample_dirichlet(double alpha, int m, Rng& rng) {
    if (!(alpha > 0.0)) throw UsageError("dirichlet: alpha must be positive");
    std::gamma_distribution<double> gamma(alpha, 1.0);
    std::vector<double> w(static_cast<std::size_t>(m));
    double total = 0.0;
    do {
        total = 0.0;
        for (double& x : w) {
            x = gamma(rng);
            total += x;
        }
    } while (!(total > 0.0));
    for (double& x : w) x /= total;
    return w;
}

std::vector<MixupVariant> mixup_augment_detailed(std::span<const TimeSeries> series, int m, double alpha,
                                                 int n_variants, std::uint64_t seed, const WeightDraw& draw) {
    if (m < 2) throw UsageError("mixup: m must be at least 2");
    if (series.size() < static_cast<std::size_t>(m)) {
        throw UsageError("mixup: need at least " + std::to_string(m) + " series, got " + std::to_string(series.size()));
    }
    if (!(alpha > 0.0)) throw UsageError("mixup: alpha must be positive");
    std::size_t len = std::numeric_limits<std::size_t>::max();
    for (const auto& s : series) len = std::min(len, s.size());

    std::vector<MixupVariant> out;
    for (int v = 0; v < n_variants; ++v) {
        Rng rng = make_rng(derive_seed(seed, static_cast<std::uint64_t>(v)));
        std::vector<std::size_t> order(series.size());
        std::iota(order.begin(), order.end(), 0);
        for (int i = 0; i < m; ++i) {
            std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), order.size() - 1);
            std::swap(order[static_cast<std::size_t>(i)], order[pick(rng)]);
        }
        order.resize(static_cast<std::size_t>(m));
        auto weights = draw ? draw(m, rng) : sample_dirichlet(alpha, m, rng);
        if (weights.size() != static_cast<std::size_t>(m)) throw UsageError("mixup: weight draw has wrong size");

        std::vector<double> values(len, 0.0);
        for (int i = 0; i < m; ++i) {
            const auto& s = series[order[static_cast<std::size_t>(i)]];
            kernels::axpy(weights[static_cast<std::size_t>(i)], s.values().last(len), values);
        }
        const auto& first = series[order[0]];
        out.push_back({first.derive("mixup" + std::to_string(v), std::move(values), first.size() - len), order,
                       std::move(weights)});
    }
    return out;
}

std::vector<TimeSeries> mixup_augment(std::span<const TimeSeries> series, int m, double alpha, int n_variants,
                                      std::uint64_t seed) {
    auto detailed = mixup_augment_detailed(series, m, alpha, n_variants, seed);
    std::vector<TimeSeries> out;
    for (auto& v : detailed) out.push_back(std::move(v.series));
    return out;
}

}  // namespace tidecast
