#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "fmls/density.hpp"
#include "fmls/errors.hpp"

using namespace fmls;

namespace {

constexpr double kPi = std::numbers::pi;

double gaussian_var2(double m) { return std::exp(-m * m / 4.0) / (2.0 * std::sqrt(kPi)); }

// Independent oracle: adaptive Gauss-Kronrod on the untilted inversion
// integral (1/pi) int_0^inf Re[exp(-ikm) exp(k^alpha e^{-i alpha pi/2})] dk.
double oracle_density(double m, double alpha) {
    const std::complex<double> rot = std::polar(1.0, -alpha * kPi / 2.0);
    auto g = [&](double k) {
        const std::complex<double> e = std::pow(k, alpha) * rot - std::complex<double>(0.0, k * m);
        return std::exp(e).real();
    };
    const double kmax = std::pow(60.0 / std::abs(std::cos(alpha * kPi / 2.0)), 1.0 / alpha);
    double err = 0;
    const double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, 0.0, kmax, 20,
                                                                                  1e-14, &err);
    return v / kPi;
}

const DensityTable& table_for(double alpha) {
    static std::map<double, DensityTable> cache;
    auto it = cache.find(alpha);
    if (it == cache.end()) it = cache.emplace(alpha, DensityTable::build(alpha)).first;
    return it->second;
}

}  // namespace

TEST(CharExponent, Examples) {
    const auto c = char_exponent(1.0, 2.0);
    EXPECT_NEAR(c.real(), -1.0, 1e-15);
    EXPECT_NEAR(c.imag(), 0.0, 1e-15);
    EXPECT_EQ(char_exponent(0.0, 1.5), std::complex<double>(0.0, 0.0));
    EXPECT_EQ(char_exponent(-1.0, 1.5), std::conj(char_exponent(1.0, 1.5)));
    for (double a : {1.1, 1.5, 1.9, 2.0}) {
        for (double k : {-10.0, -0.3, 0.7, 5.0}) EXPECT_LE(char_exponent(k, a).real(), 0.0);
    }
    EXPECT_THROW(char_exponent(1.0, 1.0), DomainError);
}

TEST(Density, GaussianLimit) {
    EXPECT_NEAR(density(0.0, 2.0), 1.0 / (2.0 * std::sqrt(kPi)), 1e-13);
    EXPECT_NEAR(density(0.0, 2.0), 0.2820948, 1e-7);
    for (double m : {-6.0, -2.0, 1.0, 3.5, 8.0}) EXPECT_NEAR(density(m, 2.0), gaussian_var2(m), 1e-13);
}

TEST(Density, ClosedFormAtOrigin) {
    for (double a : {1.3, 1.5, 1.8}) {
        const double exact = std::tgamma(1.0 / a) * std::sin(kPi / a) / (kPi * a);
        EXPECT_NEAR(density(0.0, a), exact, 1e-12) << a;
    }
    EXPECT_NEAR(density(0.0, 1.5), 0.2488548, 1e-6);
}

TEST(Density, MatchesQuadratureOracle) {
    for (double a : {1.3, 1.5, 1.7, 1.9}) {
        for (double m : {-3.0, -1.5, -0.5, 0.4, 1.0, 2.5, 5.0}) {
            const auto dv = density_with_error(m, a);
            EXPECT_NEAR(dv.value, oracle_density(m, a), 1e-11) << a << " " << m;
            EXPECT_LE(dv.error_estimate, 1e-12);
            EXPECT_GT(dv.nodes, 0u);
        }
    }
}

TEST(Density, NonNegativeInBothTails) {
    for (double m : {-60.0, -30.0, -10.0, 50.0, 300.0, 5000.0}) EXPECT_GE(density(m, 1.4), 0.0);
    EXPECT_EQ(density(-200.0, 1.7), 0.0);
}

TEST(Density, LeftTailIsRelativelyAccurate) {
    // Saddle-point asymptotics: log f ~ (1 - alpha) eta^alpha, eta = (|m|/alpha)^(1/(alpha-1)).
    const double a = 1.5, m = -8.0;
    const double eta = std::pow(-m / a, 1.0 / (a - 1.0));
    const double lead = (1.0 - a) * std::pow(eta, a);
    const double f = density(m, a);
    ASSERT_GT(f, 0.0);
    EXPECT_NEAR(std::log(f) / lead, 1.0, 0.05);
}

TEST(Density, PowerLawSlope) {
    const double a = 1.4;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (double m = 20.0; m <= 100.0; m += 1.0) {
        const double x = std::log(m), y = std::log(density(m, a));
        sx += x; sy += y; sxx += x * x; sxy += x * y; ++n;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    EXPECT_NEAR(slope, -2.4, 0.05);
}

TEST(Density, AsymptoticSeriesAgreesInTheTail) {
    for (double a : {1.3, 1.5, 1.8}) {
        for (double m : {60.0, 150.0}) {
            const double f = density(m, a);
            EXPECT_NEAR(density_asymptotic(m, a) / f, 1.0, 1e-6) << a << " " << m;
        }
    }
    EXPECT_NEAR(density_asymptotic(1000.0, 1.4), std::pow(1000.0, -2.4) / std::tgamma(-1.4), 1e-3 * std::pow(1000.0, -2.4));
    EXPECT_THROW(density_asymptotic(-1.0, 1.4), DomainError);
}

TEST(Density, RejectsBadInputs) {
    EXPECT_THROW(density(0.0, 1.0), DomainError);
    EXPECT_THROW(density(0.0, 2.5), DomainError);
    EXPECT_THROW(density(0.0, 1.5, 0.0), DomainError);
}

TEST(Density, UnreachableToleranceRaisesAccuracyError) {
    try {
        density(0.3, 1.5, 1e-30);
        FAIL() << "expected NumericalAccuracyError";
    } catch (const NumericalAccuracyError& e) {
        EXPECT_GT(e.achieved(), 1e-30);
    }
}

class TableAlpha : public ::testing::TestWithParam<double> {};

TEST_P(TableAlpha, Normalization) {
    const auto& t = table_for(GetParam());
    EXPECT_LT(t.normalization_error(), 1e-6);
    for (double v : t.values()) ASSERT_GE(v, 0.0);
}

TEST_P(TableAlpha, ExponentialMomentIdentity) {
    const double a = GetParam();
    const auto& t = table_for(a);
    for (double th : {0.1, 0.5, 1.0}) {
        const double exact = std::exp(std::pow(th, a));
        EXPECT_LT(std::abs(t.exp_moment(th) - exact) / exact, 1e-5) << th;
    }
    EXPECT_NEAR(t.exp_moment(0.0), 1.0, 1e-6);
}

TEST_P(TableAlpha, TailExponent) {
    const double a = GetParam();
    const auto& t = table_for(a);
    if (a < 2.0) {
        EXPECT_NEAR(t.tail_exponent(), -(1.0 + a), 0.05);
    } else {
        EXPECT_LE(t.tail_exponent(), -(1.0 + a));
    }
}

TEST_P(TableAlpha, TailIntegralMonotoneOnRandomPairs) {
    const auto& t = table_for(GetParam());
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-45.0, 250.0);
    for (int i = 0; i < 1000; ++i) {
        double d1 = u(rng), d2 = u(rng);
        if (d1 > d2) std::swap(d1, d2);
        const double v1 = t.tail_integral(d1), v2 = t.tail_integral(d2);
        EXPECT_GE(v1, v2 - 1e-15) << d1 << " " << d2;
        EXPECT_GE(v2, 0.0);
        EXPECT_LE(v1, 1.0);
    }
}

TEST_P(TableAlpha, LeftWindowDecaysForPricingTilts) {
    const auto& t = table_for(GetParam());
    EXPECT_LT(t.left_tail_margin(1.0), 1e-14);
}

INSTANTIATE_TEST_SUITE_P(Alphas, TableAlpha, ::testing::Values(1.3, 1.4, 1.5, 1.7, 1.9, 2.0));

TEST(DensityTable, GaussianTableMatchesClosedForm) {
    const auto& t = table_for(2.0);
    const auto m = t.abscissae();
    double worst = 0;
    for (std::size_t k = 0; k < m.size(); ++k) worst = std::max(worst, std::abs(t.values()[k] - gaussian_var2(m[k])));
    EXPECT_LT(worst, 1e-8);
    EXPECT_NEAR(t.tail_integral(0.0), 0.5, 1e-9);
    EXPECT_NEAR(t.tail_integral(1.3), std::erfc(1.3 / 2.0) / 2.0, 1e-9);
    EXPECT_NEAR(t.exp_moment(1.0), std::exp(1.0), 1e-8);
}

TEST(DensityTable, EndpointsOfTailIntegral) {
    const auto& t = table_for(1.5);
    EXPECT_NEAR(t.tail_integral(t.left_cut()), 1.0, 1e-6);
    EXPECT_NEAR(t.tail_integral(-std::numeric_limits<double>::infinity()), 1.0, 1e-6);
    EXPECT_LE(t.tail_integral(t.right_cut()), tail_mass_asymptotic(t.right_cut(), 1.5) + 1e-12);
    EXPECT_EQ(t.tail_integral(std::numeric_limits<double>::infinity()), 0.0);
    EXPECT_FALSE(t.extrapolation_flag(0.0));
    EXPECT_TRUE(table_for(1.3).extrapolation_flag(t.right_cut()));
}

TEST(DensityTable, InterpolationMatchesDirectEvaluation) {
    const auto& t = table_for(1.5);
    for (double m : {-2.345, -0.001, 0.12345, 3.7777, 42.4242}) {
        EXPECT_NEAR(t(m), density(m, 1.5), 1e-11) << m;
    }
    EXPECT_EQ(t(-100.0), 0.0);
    EXPECT_NEAR(t(500.0), density_asymptotic(500.0, 1.5), 1e-18);
}

TEST(DensityTable, ExpWeightedPartialIntegralMatchesOracle) {
    const auto& t = table_for(1.5);
    for (double d : {-1.3, 0.0, 0.777, 4.0}) {
        for (double th : {0.2, 0.8}) {
            auto g = [&](double m) { return std::exp(-th * m) * density(m, 1.5); };
            double err = 0;
            const double body = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, d, 200.0, 15, 1e-13, &err);
            const double ref = body + exp_weighted_tail_asymptotic(200.0, th, 1.5);
            EXPECT_NEAR(t.exp_weighted_integral(d, th), ref, 1e-9) << d << " " << th;
        }
    }
    EXPECT_NEAR(t.exp_weighted_integral(-1e300, 0.5), std::exp(std::pow(0.5, 1.5)), 1e-5);
    EXPECT_NEAR(t.exp_weighted_integral(-1e300, 0.5), 1.42415, 1e-4);
    EXPECT_THROW(t.exp_weighted_integral(0.0, -1.0), DomainError);
}

TEST(DensityTable, DivergenceGuardTrips) {
    const auto t = DensityTable::build(1.9, DensityGridSpec{-12.0, 200.0, 0.01});
    EXPECT_THROW(t.exp_moment(3.0), NumericalAccuracyError);
}

TEST(DensityTable, DeterministicAndCsv) {
    const auto t1 = DensityTable::build(1.7, DensityGridSpec{-20.0, 100.0, 0.02});
    const auto t2 = DensityTable::build(1.7, DensityGridSpec{-20.0, 100.0, 0.02});
    ASSERT_EQ(t1.values().size(), t2.values().size());
    for (std::size_t i = 0; i < t1.values().size(); ++i) ASSERT_EQ(t1.values()[i], t2.values()[i]);
    std::ostringstream os;
    t1.write_csv(os);
    EXPECT_EQ(os.str().substr(0, 4), "m,f\n");
    EXPECT_THROW(DensityTable::build(1.7, DensityGridSpec{10.0, 5.0, 0.01}), ConfigError);
}
