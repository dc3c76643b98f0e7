#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Data-parallel inner loops used by the distance and dense-layer code.
//
// Each kernel has a scalar reference and an AVX2 variant. The AVX2 variants
// vectorize across independent output elements only and never use FMA, so
// every output element sees exactly the same sequence of IEEE operations as
// the scalar loop: results are bitwise identical, not merely close.
namespace mimoe::kernels {

enum class Isa { scalar, avx2 };

struct KernelTable {
    // y[i] += a * x[i]
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // y[i] += x[i]
    void (*add)(const double* x, double* y, std::size_t n);
    // z[i] = x[i] * y[i]
    void (*mul)(const double* x, const double* y, double* z, std::size_t n);
    // out[j] = sqrt((px-xs[j])^2 + (py-ys[j])^2 + (pz-zs[j])^2)
    void (*distance_row)(double px, double py, double pz, const double* xs, const double* ys,
                         const double* zs, double* out, std::size_t n);
};

namespace scalar {
const KernelTable& table();
}

namespace avx2 {
// Only valid when cpu_supports_avx2() is true.
const KernelTable& table();
}

bool cpu_supports_avx2();

// Selected once on first use: AVX2 when the CPU has it, unless the
// MIMOE_ISA environment variable is set to "scalar".
Isa active_isa();
const KernelTable& active();
std::string_view isa_name(Isa isa);

// Overrides the runtime selection (tests and benchmarks).
void force_isa(Isa isa);

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
    active().axpy(a, x.data(), y.data(), y.size());
}
inline void add(std::span<const double> x, std::span<double> y) {
    active().add(x.data(), y.data(), y.size());
}
inline void mul(std::span<const double> x, std::span<const double> y, std::span<double> z) {
    active().mul(x.data(), y.data(), z.data(), z.size());
}

}  // namespace mimoe::kernels
