#include "mimoe/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace mimoe::kernels {
namespace {

Isa detect() {
    if (const char* env = std::getenv("MIMOE_ISA"); env != nullptr && std::string(env) == "scalar") {
        return Isa::scalar;
    }
    return cpu_supports_avx2() ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& selected() {
    static std::atomic<Isa> isa{detect()};
    return isa;
}

}  // namespace

#if !defined(MIMOE_HAVE_AVX2_KERNELS)
namespace avx2 {
const KernelTable& table() { return scalar::table(); }
}  // namespace avx2
#endif

bool cpu_supports_avx2() {
#if defined(MIMOE_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

Isa active_isa() { return selected().load(std::memory_order_relaxed); }

const KernelTable& active() {
#if defined(MIMOE_HAVE_AVX2_KERNELS)
    if (active_isa() == Isa::avx2) return avx2::table();
#endif
    return scalar::table();
}

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

void force_isa(Isa isa) {
    if (isa == Isa::avx2 && !cpu_supports_avx2()) isa = Isa::scalar;
    selected().store(isa, std::memory_order_relaxed);
}

}  // namespace mimoe::kernels
