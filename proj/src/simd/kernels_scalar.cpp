#include <cmath>
#include <cstddef>

#include "fmls/simd/kernels.hpp"

namespace fmls::simd::scalar {

void trig_series(std::span<const double> a, std::span<const double> b, double dk,
                 std::span<const double> m, std::span<double> out) {
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < m.size(); ++i) {
        const double step = dk * m[i];
        const double rc = std::cos(step);
        const double rs = std::sin(step);
        double acc = 0.0;
        double c = 1.0;
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j % kReseedStride == 0) {
                const double arg = static_cast<double>(j) * step;
                c = std::cos(arg);
                s = std::sin(arg);
            }
            acc += a[j] * c + b[j] * s;
            const double cn = c * rc - s * rs;
            s = s * rc + c * rs;
            c = cn;
        }
        out[i] = acc;
    }
}

double geometric_dot(std::span<const double> f, double ratio) {
    double acc = 0.0;
    double w = 1.0;
    for (std::size_t k = 0; k < f.size(); ++k) {
        if (k % kPowReseedStride == 0) w = std::pow(ratio, static_cast<double>(k));
        acc += f[k] * w;
        w *= ratio;
    }
    return acc;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
    return acc;
}

}  // namespace fmls::simd::scalar
