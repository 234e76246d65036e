#include <cstdlib>
#include <stdexcept>
#include <string_view>

#include "fmls/simd/kernels.hpp"

namespace fmls::simd {

bool avx2_available() {
#if defined(FMLS_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
    static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return ok;
#else
    return false;
#endif
}

Isa active_isa() {
    if (const char* env = std::getenv("FMLS_SIMD"); env && std::string_view(env) == "scalar") {
        return Isa::Scalar;
    }
    return avx2_available() ? Isa::Avx2 : Isa::Scalar;
}

std::string_view isa_name(Isa isa) {
    return isa == Isa::Avx2 ? "avx2" : "scalar";
}

void trig_series(std::span<const double> a, std::span<const double> b, double dk,
                 std::span<const double> m, std::span<double> out) {
    if (a.size() != b.size() || m.size() != out.size()) {
        throw std::invalid_argument("trig_series: mismatched spans");
    }
#if defined(FMLS_HAVE_AVX2)
    if (active_isa() == Isa::Avx2) return avx2::trig_series(a, b, dk, m, out);
#endif
    scalar::trig_series(a, b, dk, m, out);
}

double geometric_dot(std::span<const double> f, double ratio) {
#if defined(FMLS_HAVE_AVX2)
    if (active_isa() == Isa::Avx2) return avx2::geometric_dot(f, ratio);
#endif
    return scalar::geometric_dot(f, ratio);
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: mismatched spans");
#if defined(FMLS_HAVE_AVX2)
    if (active_isa() == Isa::Avx2) return avx2::dot(a, b);
#endif
    return scalar::dot(a, b);
}

}  // namespace fmls::simd
