#pragma once

// Data-parallel inner loops. Each kernel has a scalar reference
// implementation and an AVX2+FMA variant; the public entry points dispatch
// at runtime on the detected CPU. Setting FMLS_SIMD=scalar in the
// environment forces the reference path.

#include <span>
#include <string_view>

namespace fmls::simd {

enum class Isa { Scalar, Avx2 };

/// Best instruction set usable on this machine (honours FMLS_SIMD).
Isa active_isa();

/// True when the AVX2 variant was compiled in and the CPU supports it.
bool avx2_available();

std::string_view isa_name(Isa isa);

// out[i] = sum_j a[j] cos(j dk m[i]) + b[j] sin(j dk m[i]),  j = 0 .. a.size()-1.
// a and b must have equal length; out and m must have equal length.
void trig_series(std::span<const double> a, std::span<const double> b, double dk,
                 std::span<const double> m, std::span<double> out);

// sum_k f[k] * ratio^k.
double geometric_dot(std::span<const double> f, double ratio);

// sum_k a[k] * b[k]; spans of equal length.
double dot(std::span<const double> a, std::span<const double> b);

namespace scalar {
void trig_series(std::span<const double> a, std::span<const double> b, double dk,
                 std::span<const double> m, std::span<double> out);
double geometric_dot(std::span<const double> f, double ratio);
double dot(std::span<const double> a, std::span<const double> b);
}  // namespace scalar

namespace avx2 {
void trig_series(std::span<const double> a, std::span<const double> b, double dk,
                 std::span<const double> m, std::span<double> out);
double geometric_dot(std::span<const double> f, double ratio);
double dot(std::span<const double> a, std::span<const double> b);
}  // namespace avx2

/// Rotation recurrences are re-seeded from exact cos/sin every this many terms.
inline constexpr std::size_t kReseedStride = 64;
/// Geometric recurrences are re-seeded from std::pow every this many terms.
inline constexpr std::size_t kPowReseedStride = 256;

}  // namespace fmls::simd
