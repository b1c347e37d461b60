#include "mgtrap/simd/kernels.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace mgtrap::simd {

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
    }
    return "unknown";
}

bool isa_supported(Isa isa) {
    switch (isa) {
        case Isa::scalar: return true;
        case Isa::avx2:
#if defined(MGTRAP_HAVE_AVX2)
            return __builtin_cpu_supports("avx2");
#else
            return false;
#endif
    }
    return false;
}

const KernelTable& kernels_for(Isa isa) {
    if (!isa_supported(isa))
        throw std::invalid_argument("SIMD variant not supported here: " + std::string(isa_name(isa)));
    switch (isa) {
        case Isa::scalar: return detail::scalar_table();
        case Isa::avx2:
#if defined(MGTRAP_HAVE_AVX2)
            return detail::avx2_table();
#else
            break;
#endif
    }
    return detail::scalar_table();
}

namespace {

Isa select_isa() {
    if (const char* env = std::getenv("MGTRAP_SIMD")) {
        const std::string_view want(env);
        if (want == "scalar") return Isa::scalar;
        if (want == "avx2" && isa_supported(Isa::avx2)) return Isa::avx2;
    }
    if (isa_supported(Isa::avx2)) return Isa::avx2;
    return Isa::scalar;
}

}  // namespace

const KernelTable& kernels() {
    static const KernelTable& table = kernels_for(select_isa());
    return table;
}

Isa active_isa() { return kernels().isa; }

}  // namespace mgtrap::simd
