#include "mimoe/kernels.hpp"

#include <cmath>

namespace mimoe::kernels::scalar {
namespace {

void axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void add(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
}

void mul(const double* x, const double* y, double* z, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) z[i] = x[i] * y[i];
}

void distance_row(double px, double py, double pz, const double* xs, const double* ys,
                  const double* zs, double* out, std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) {
        const double dx = px - xs[j];
        const double dy = py - ys[j];
        const double dz = pz - zs[j];
        out[j] = std::sqrt(dx * dx + dy * dy + dz * dz);
    }
}

constexpr KernelTable kTable{axpy, add, mul, distance_row};

}  // namespace

const KernelTable& table() { return kTable; }

}  // namespace mimoe::kernels::scalar
