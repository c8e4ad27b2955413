#include "tidecast/error.hpp"
#include "tidecast/kernels.hpp"

#include <cassert>
#include <cstdlib>
#include <string>

namespace tidecast::kernels {

namespace {

struct Table {
    Isa isa;
    double (*dot)(const double*, const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    double (*squared_distance)(const double*, const double*, std::size_t);
};

constexpr Table kScalar{Isa::scalar, scalar::dot, scalar::axpy, scalar::squared_distance};
constexpr Table kAvx2{Isa::avx2, avx2::dot, avx2::axpy, avx2::squared_distance};
constexpr Table kNeon{Isa::neon, neon::dot, neon::axpy, neon::squared_distance};

const Table& table_for(Isa isa) {
    switch (isa) {
        case Isa::avx2: return kAvx2;
        case Isa::neon: return kNeon;
        case Isa::scalar: break;
    }
    return kScalar;
}

Isa detect() {
    if (const char* env = std::getenv("TIDECAST_ISA")) {
        const std::string want(env);
        if (want == "scalar") return Isa::scalar;
        if (want == "avx2" && isa_supported(Isa::avx2)) return Isa::avx2;
        if (want == "neon" && isa_supported(Isa::neon)) return Isa::neon;
    }
    if (isa_supported(Isa::avx2)) return Isa::avx2;
    if (isa_supported(Isa::neon)) return Isa::neon;
    return Isa::scalar;
}

const Table*& current() {
    static const Table* table = &table_for(detect());
    return table;
}

}  // namespace

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
        case Isa::neon: return "neon";
    }
    return "unknown";
}

bool isa_supported(Isa isa) {
    switch (isa) {
        case Isa::scalar: return true;
        case Isa::avx2:
#if defined(__x86_64__) || defined(__i386__)
            return avx2::compiled() && __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
        case Isa::neon: return neon::compiled();
    }
    return false;
}

Isa active_isa() { return current()->isa; }

void force_isa(Isa isa) {
    if (!isa_supported(isa)) {
        throw UsageError("kernel variant '" + std::string(isa_name(isa)) + "' is not available on this CPU");
    }
    current() = &table_for(isa);
}

double dot(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    return current()->dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    assert(x.size() == y.size());
    current()->axpy(alpha, x.data(), y.data(), x.size());
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    return current()->squared_distance(a.data(), b.data(), a.size());
}

void matvec(std::span<const double> matrix, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> out) {
    assert(matrix.size() == rows * cols && x.size() == cols && out.size() == rows);
    const auto* table = current();
    for (std::size_t r = 0; r < rows; ++r) {
        out[r] = table->dot(matrix.data() + r * cols, x.data(), cols);
    }
}

}  // namespace tidecast::kernels
