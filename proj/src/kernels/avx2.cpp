// Compiled with -mavx2 (and without -mfma). Nothing in here may be called
// unless cpu_supports_avx2() returned true.
#include "mimoe/kernels.hpp"

#include <immintrin.h>

#include <cmath>

namespace mimoe::kernels::avx2 {
namespace {

void axpy(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void add(const double* x, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_loadu_pd(x + i)));
    }
    for (; i < n; ++i) y[i] += x[i];
}

void mul(const double* x, const double* y, double* z, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(z + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) z[i] = x[i] * y[i];
}

void distance_row(double px, double py, double pz, const double* xs, const double* ys,
                  const double* zs, double* out, std::size_t n) {
    const __m256d vx = _mm256_set1_pd(px);
    const __m256d vy = _mm256_set1_pd(py);
    const __m256d vz = _mm256_set1_pd(pz);
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        const __m256d dx = _mm256_sub_pd(vx, _mm256_loadu_pd(xs + j));
        const __m256d dy = _mm256_sub_pd(vy, _mm256_loadu_pd(ys + j));
        const __m256d dz = _mm256_sub_pd(vz, _mm256_loadu_pd(zs + j));
        // Same association as the scalar loop: (dx*dx + dy*dy) + dz*dz.
        __m256d acc = _mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(dz, dz));
        _mm256_storeu_pd(out + j, _mm256_sqrt_pd(acc));
    }
    for (; j < n; ++j) {
        const double dx = px - xs[j];
        const double dy = py - ys[j];
        const double dz = pz - zs[j];
        out[j] = std::sqrt(dx * dx + dy * dy + dz * dz);
    }
}

constexpr KernelTable kTable{axpy, add, mul, distance_row};

}  // namespace

const KernelTable& table() { return kTable; }

}  // namespace mimoe::kernels::avx2
