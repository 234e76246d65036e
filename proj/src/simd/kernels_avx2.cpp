// Compiled with -mavx2 -mfma. Only reached through the dispatcher after a
// CPU feature check.

#include <immintrin.h>

#include <array>
#include <cmath>
#include <cstddef>

#include "fmls/simd/kernels.hpp"

namespace fmls::simd::avx2 {

namespace {

// Four m-values per lane group; each lane runs its own rotation.
void trig_series4(const double* a, const double* b, std::size_t n, double dk,
                  const double* m4, double* out4) {
    alignas(32) std::array<double, 4> rc{}, rs{}, steps{};
    for (int l = 0; l < 4; ++l) {
        steps[l] = dk * m4[l];
        rc[l] = std::cos(steps[l]);
        rs[l] = std::sin(steps[l]);
    }
    const __m256d vrc = _mm256_load_pd(rc.data());
    const __m256d vrs = _mm256_load_pd(rs.data());
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    __m256d c = _mm256_setzero_pd();
    __m256d s = _mm256_setzero_pd();
    alignas(32) std::array<double, 4> cs{}, ss{};
    for (std::size_t j0 = 0; j0 < n; j0 += kReseedStride) {
        for (int l = 0; l < 4; ++l) {
            const double arg = static_cast<double>(j0) * steps[l];
            cs[l] = std::cos(arg);
            ss[l] = std::sin(arg);
        }
        c = _mm256_load_pd(cs.data());
        s = _mm256_load_pd(ss.data());
        const std::size_t j1 = j0 + kReseedStride < n ? j0 + kReseedStride : n;
        std::size_t j = j0;
        for (; j + 1 < j1; j += 2) {
            acc0 = _mm256_fmadd_pd(_mm256_broadcast_sd(a + j), c, acc0);
            acc1 = _mm256_fmadd_pd(_mm256_broadcast_sd(b + j), s, acc1);
            __m256d cn = _mm256_fmsub_pd(c, vrc, _mm256_mul_pd(s, vrs));
            s = _mm256_fmadd_pd(s, vrc, _mm256_mul_pd(c, vrs));
            c = cn;
            acc0 = _mm256_fmadd_pd(_mm256_broadcast_sd(a + j + 1), c, acc0);
            acc1 = _mm256_fmadd_pd(_mm256_broadcast_sd(b + j + 1), s, acc1);
            cn = _mm256_fmsub_pd(c, vrc, _mm256_mul_pd(s, vrs));
            s = _mm256_fmadd_pd(s, vrc, _mm256_mul_pd(c, vrs));
            c = cn;
        }
        if (j < j1) {
            acc0 = _mm256_fmadd_pd(_mm256_broadcast_sd(a + j), c, acc0);
            acc1 = _mm256_fmadd_pd(_mm256_broadcast_sd(b + j), s, acc1);
        }
    }
    _mm256_storeu_pd(out4, _mm256_add_pd(acc0, acc1));
}

}  // namespace

void trig_series(std::span<const double> a, std::span<const double> b, double dk,
                 std::span<const double> m, std::span<double> out) {
    const std::size_t n = a.size();
    std::size_t i = 0;
    for (; i + 4 <= m.size(); i += 4) {
        trig_series4(a.data(), b.data(), n, dk, m.data() + i, out.data() + i);
    }
    if (i < m.size()) {
        scalar::trig_series(a, b, dk, m.subspan(i), out.subspan(i));
    }
}

double geometric_dot(std::span<const double> f, double ratio) {
    const std::size_t n = f.size();
    const double r4 = ratio * ratio * ratio * ratio;
    const __m256d vr4 = _mm256_set1_pd(r4);
    __m256d acc = _mm256_setzero_pd();
    std::size_t k = 0;
    for (std::size_t k0 = 0; k0 + 4 <= n; k0 += kPowReseedStride) {
        const double base = std::pow(ratio, static_cast<double>(k0));
        __m256d w = _mm256_set_pd(base * ratio * ratio * ratio, base * ratio * ratio,
                                  base * ratio, base);
        const std::size_t k1 = k0 + kPowReseedStride < n ? k0 + kPowReseedStride : n;
        for (k = k0; k + 4 <= k1; k += 4) {
            acc = _mm256_fmadd_pd(_mm256_loadu_pd(f.data() + k), w, acc);
            w = _mm256_mul_pd(w, vr4);
        }
        if (k < k1) break;
    }
    alignas(32) std::array<double, 4> lanes{};
    _mm256_store_pd(lanes.data(), acc);
    double total = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
    if (k < n) {
        double w = std::pow(ratio, static_cast<double>(k));
        for (; k < n; ++k) {
            total += f[k] * w;
            w *= ratio;
        }
    }
    return total;
}

double dot(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size();
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t k = 0;
    for (; k + 8 <= n; k += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + k), _mm256_loadu_pd(b.data() + k), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + k + 4), _mm256_loadu_pd(b.data() + k + 4), acc1);
    }
    alignas(32) std::array<double, 4> lanes{};
    _mm256_store_pd(lanes.data(), _mm256_add_pd(acc0, acc1));
    double total = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
    for (; k < n; ++k) total += a[k] * b[k];
    return total;
}

}  // namespace fmls::simd::avx2
