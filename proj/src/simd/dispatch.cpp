#include <atomic>
#include <cstdlib>
#include <string>

#include "wskp/errors.hpp"
#include "wskp/simd/kernels.hpp"

namespace wskp::simd {

namespace {

bool cpu_has_avx2()
{
#if defined(WSKP_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Isa initial_isa()
{
    const Isa best = detected_isa();
    if (const char* env = std::getenv("WSKP_SIMD")) {
        const std::string want(env);
        if (want == "scalar") {
            return Isa::scalar;
        }
        if (want == "avx2" && best == Isa::avx2) {
            return Isa::avx2;
        }
    }
    return best;
}

std::atomic<int>& active_slot()
{
    static std::atomic<int> slot{static_cast<int>(initial_isa())};
    return slot;
}

} // namespace

const char* isa_name(Isa isa)
{
    return isa == Isa::avx2 ? "avx2" : "scalar";
}

Isa detected_isa()
{
    static const Isa isa = cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
    return isa;
}

Isa active_isa()
{
    return static_cast<Isa>(active_slot().load());
}

void set_active_isa(Isa isa)
{
    if (isa == Isa::avx2 && detected_isa() != Isa::avx2) {
        throw ConfigError("AVX2 kernels requested but the CPU does not support AVX2+FMA");
    }
    active_slot().store(static_cast<int>(isa));
}

const KernelTable& kernels_for(Isa isa)
{
#if defined(WSKP_HAVE_AVX2)
    if (isa == Isa::avx2) {
        if (detected_isa() != Isa::avx2) {
            throw ConfigError("AVX2 kernels unavailable on this CPU");
        }
        return avx2_kernels();
    }
#else
    if (isa == Isa::avx2) {
        throw ConfigError("built without AVX2 kernels");
    }
#endif
    return scalar_kernels();
}

const KernelTable& kernels()
{
    return kernels_for(active_isa());
}

} // namespace wskp::simd
