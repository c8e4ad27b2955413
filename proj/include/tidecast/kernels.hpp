#pragma once

// Dense inner-loop kernels used by the transformer layers and the
// shape-based distance. Each kernel has a scalar reference implementation
// and vectorized variants (AVX2+FMA on x86-64, NEON on AArch64). The variant
// is chosen once at startup from the CPU's capabilities; TIDECAST_ISA=scalar
// (or avx2 / neon) in the environment overrides the choice.

#include <cstddef>
#include <span>
#include <string_view>

namespace tidecast::kernels {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa);

// True when the variant was compiled in and the running CPU supports it.
bool isa_supported(Isa isa);

Isa active_isa();

// Switches the dispatch table. Throws UsageError for unsupported variants.
void force_isa(Isa isa);

// sum_i a[i] * b[i]
double dot(std::span<const double> a, std::span<const double> b);

// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

// sum_i (a[i] - b[i])^2
double squared_distance(std::span<const double> a, std::span<const double> b);

// out[r] = dot(row r of the row-major rows x cols matrix, x)
void matvec(std::span<const double> matrix, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> out);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
}  // namespace scalar

namespace avx2 {
bool compiled();
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
}  // namespace avx2

namespace neon {
bool compiled();
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
}  // namespace neon

}  // namespace tidecast::kernels
