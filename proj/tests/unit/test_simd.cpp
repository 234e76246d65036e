#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "fmls/simd/kernels.hpp"

using namespace fmls::simd;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed, double lo = -1, double hi = 1) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

double naive_trig(const std::vector<double>& a, const std::vector<double>& b, double dk, double m) {
    long double s = 0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const long double arg = static_cast<long double>(j) * dk * m;
        s += a[j] * std::cos(arg) + b[j] * std::sin(arg);
    }
    return static_cast<double>(s);
}

}  // namespace

TEST(Simd, IsaNames) {
    EXPECT_EQ(isa_name(Isa::Scalar), "scalar");
    EXPECT_EQ(isa_name(Isa::Avx2), "avx2");
    if (!avx2_available()) EXPECT_EQ(active_isa(), Isa::Scalar);
}

TEST(Simd, ScalarTrigSeriesMatchesDirectSum) {
    for (std::size_t n : {1u, 2u, 63u, 64u, 65u, 1000u}) {
        const auto a = random_vec(n, 1 + n), b = random_vec(n, 2 + n);
        const auto m = random_vec(13, 3, -50, 200);
        std::vector<double> out(m.size());
        scalar::trig_series(a, b, 0.0025, m, out);
        for (std::size_t i = 0; i < m.size(); ++i) {
            EXPECT_NEAR(out[i], naive_trig(a, b, 0.0025, m[i]), 1e-12 * std::sqrt(double(n)));
        }
    }
}

TEST(Simd, Avx2TrigSeriesMatchesScalar) {
    if (!avx2_available()) GTEST_SKIP() << "no AVX2";
    for (std::size_t n : {1u, 3u, 64u, 129u, 5000u}) {
        for (std::size_t nm : {1u, 4u, 7u, 33u}) {
            const auto a = random_vec(n, 10 + n), b = random_vec(n, 20 + n);
            const auto m = random_vec(nm, 30 + nm, -40, 200);
            std::vector<double> o1(nm), o2(nm);
            scalar::trig_series(a, b, 0.003, m, o1);
            avx2::trig_series(a, b, 0.003, m, o2);
            for (std::size_t i = 0; i < nm; ++i) {
                EXPECT_NEAR(o1[i], o2[i], 1e-12 * (1.0 + std::abs(o1[i])) * std::sqrt(double(n)))
                    << n << " " << nm << " " << i;
            }
        }
    }
}

TEST(Simd, GeometricDotMatchesDirectSum) {
    for (std::size_t n : {0u, 1u, 5u, 255u, 256u, 257u, 30000u}) {
        const auto f = random_vec(n, 40 + n, 0, 1);
        for (double r : {0.0, 0.3, 0.9999, 1.0}) {
            long double ref = 0, p = 1;
            for (double v : f) {
                ref += v * p;
                p *= r;
            }
            const double tol = 1e-13 * (1.0 + static_cast<double>(std::abs(ref)));
            EXPECT_NEAR(scalar::geometric_dot(f, r), static_cast<double>(ref), tol) << n << " " << r;
            if (avx2_available()) {
                EXPECT_NEAR(avx2::geometric_dot(f, r), static_cast<double>(ref), tol) << n << " " << r;
            }
            EXPECT_NEAR(geometric_dot(f, r), static_cast<double>(ref), tol);
        }
    }
}

TEST(Simd, DotMatchesDirectSum) {
    for (std::size_t n : {0u, 1u, 7u, 8u, 9u, 1000u, 40001u}) {
        const auto a = random_vec(n, 7 + n, -1, 1);
        const auto b = random_vec(n, 900 + n, -2, 2);
        long double ref = 0;
        for (std::size_t k = 0; k < n; ++k) ref += static_cast<long double>(a[k]) * b[k];
        const double tol = 1e-14 * (1.0 + std::sqrt(double(n)));
        EXPECT_NEAR(scalar::dot(a, b), static_cast<double>(ref), tol) << n;
        if (avx2_available()) EXPECT_NEAR(avx2::dot(a, b), static_cast<double>(ref), tol) << n;
        EXPECT_NEAR(dot(a, b), static_cast<double>(ref), tol);
    }
}

TEST(Simd, DispatchRejectsMismatchedSpans) {
    std::vector<double> a(3), b(4), m(2), out(2), out3(3);
    EXPECT_THROW(dot(a, b), std::invalid_argument);
    EXPECT_THROW(trig_series(a, b, 0.1, m, out), std::invalid_argument);
    EXPECT_THROW(trig_series(a, a, 0.1, m, out3), std::invalid_argument);
}
