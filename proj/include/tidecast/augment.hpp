#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "tidecast/core_data.hpp"
#include "tidecast/decomp.hpp"
#include "tidecast/rng.hpp"

namespace tidecast {

// ---------------------------------------------------------------------------
// Frequency aggregation

enum class AggregateMode { mean, sum };

// Aggregates consecutive windows of `factor` points; a trailing partial
// window is dropped. Aggregating a whole number of class units promotes the
// frequency class (60 minutes -> hour, 24 hours -> day, 7 days -> week,
// 3 months -> quarter) and resets the period to that class's default.
// Otherwise the class is kept, the step multiple grows by `factor` and the
// period shrinks to max(1, period / factor).
TimeSeries frequency_aggregate(const TimeSeries& series, int factor, AggregateMode mode);
Frequency aggregated_frequency(const Frequency& freq, int factor);

// ---------------------------------------------------------------------------
// Moving block bootstrap over STL residuals

struct MbbVariant {
    TimeSeries series;
    std::vector<std::size_t> block_starts;  // residual offsets, in concatenation order
};

struct MbbResult {
    Decomposition decomposition;
    std::size_t block_len = 0;
    std::vector<MbbVariant> variants;
};

// block_len == 0 selects 2 * period.
MbbResult mbb_augment_detailed(const TimeSeries& series, int period, std::size_t block_len, int n_variants,
                               std::uint64_t seed);
std::vector<TimeSeries> mbb_augment(const TimeSeries& series, int period, std::size_t block_len, int n_variants,
                                    std::uint64_t seed);

// ---------------------------------------------------------------------------
// Dynamic time warping and barycenter averaging

struct DtwResult {
    double cost = 0.0;  // sum of squared differences along the path
    std::vector<std::pair<std::size_t, std::size_t>> path;
};

DtwResult dtw(std::span<const double> a, std::span<const double> b);
double dtw_cost(std::span<const double> a, std::span<const double> b);

struct DbaResult {
    std::vector<double> barycenter;
    std::vector<double> objective;  // sum of DTW costs; entry 0 is the initial value
    int iterations = 0;
};

// Each iteration aligns every member to the barycenter and replaces each
// barycenter cell by the mean of the member points aligned to it. An update
// that does not lower the objective is discarded and iteration stops, so the
// recorded objective never increases.
DbaResult dba_detailed(std::span<const std::vector<double>> series, std::span<const double> init, int max_iters,
                       double tol);
std::vector<double> dba(std::span<const std::vector<double>> series, std::span<const double> init, int max_iters,
                        double tol);

// ---------------------------------------------------------------------------
// k-shape clustering

std::vector<double> z_normalize(std::span<const double> values);

// Shape-based distance 1 - max_shift NCC(a, b) on z-normalized inputs,
// zero-padded shifts, coefficient normalization by |a| |b|. Lies in [0, 2].
double sbd(std::span<const double> a, std::span<const double> b);

// Best shift of `b` against `a` and the resulting correlation.
struct ShiftMatch {
    long shift = 0;
    double ncc = 0.0;
};
ShiftMatch best_shift(std::span<const double> a, std::span<const double> b);

struct ClusterAssignment {
    std::vector<int> labels;
    std::vector<std::vector<double>> centroids;  // z-normalized, common length
    int iterations = 0;
};

// Series are cropped to their common (minimum) length, keeping the most
// recent points, and z-normalized before clustering.
ClusterAssignment kshape_cluster(std::span<const TimeSeries> series, int k, std::uint64_t seed, int max_iters = 50);
ClusterAssignment kshape_cluster(std::span<const std::vector<double>> series, int k, std::uint64_t seed,
                                 int max_iters = 50);

std::vector<TimeSeries> dba_augment(std::span<const TimeSeries> series, int k, int per_cluster, std::uint64_t seed,
                                    int dba_iters = 10);

// ---------------------------------------------------------------------------
// Dirichlet mixup

std::vector<double> sample_dirichlet(double alpha, int m, Rng& rng);

struct MixupVariant {
    TimeSeries series;
    std::vector<std::size_t> members;
    std::vector<double> weights;
};

// Optional override of the Dirichlet draw (receives m, returns weights).
using WeightDraw = std::function<std::vector<double>(int m, Rng& rng)>;

std::vector<MixupVariant> mixup_augment_detailed(std::span<const TimeSeries> series, int m, double alpha,
                                                 int n_variants, std::uint64_t seed, const WeightDraw& draw = {});
std::vector<TimeSeries> mixup_augment(std::span<const TimeSeries> series, int m, double alpha, int n_variants,
                                      std::uint64_t seed);

}  // namespace tidecast
