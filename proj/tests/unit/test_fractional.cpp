#include <gtest/gtest.h>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "fmls/errors.hpp"
#include "fmls/fractional.hpp"

using namespace fmls;

namespace {

std::vector<double> sample(const FracGrid& g, double (*f)(double, double), double p) {
    std::vector<double> v(g.n);
    for (std::size_t i = 0; i < g.n; ++i) v[i] = f(g.x(i), p);
    return v;
}

double exp_lambda(double x, double lambda) { return std::exp(lambda * x); }

// Caputo form: Gamma(2 - alpha)^-1 int_0^inf f''(x - s) s^{1 - alpha} ds.
double caputo_exp(double x, double lambda, double alpha) {
    boost::math::quadrature::exp_sinh<double> q;
    const double integral = q.integrate(
        [&](double s) { return lambda * lambda * std::exp(lambda * (x - s)) * std::pow(s, 1.0 - alpha); });
    return integral / boost::math::tgamma(2.0 - alpha);
}

}  // namespace

TEST(GlWeights, KnownValues) {
    const auto w2 = gl_weights(2.0, 6);
    const std::vector<double> expect{1, -2, 1, 0, 0, 0};
    for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(w2[j], expect[j]);
    const auto w = gl_weights(1.5, 3);
    EXPECT_DOUBLE_EQ(w[1], -1.5);
    EXPECT_DOUBLE_EQ(w[2], 0.375);
    EXPECT_THROW(gl_weights(1.0, 4), DomainError);
    EXPECT_THROW(gl_weights(1.5, 1), DomainError);
}

TEST(GlWeights, PartialSumsShrink) {
    for (double alpha : {1.2, 1.5, 1.9}) {
        const auto w = gl_weights(alpha, 200000);
        double s = w[0] + w[1] + w[2];
        double prev = std::abs(s);
        for (std::size_t j = 3; j < w.size(); ++j) {
            s += w[j];
            ASSERT_LT(std::abs(s), prev) << alpha << ' ' << j;
            prev = std::abs(s);
        }
        EXPECT_LT(prev, 1e-6) << alpha;
    }
}

TEST(FracDerivative, IntegerOrderIsCentralDifference) {
    const auto g = FracGrid::uniform(0.0, 2.0, 41, Extension::affine(1.0, 0.5));
    std::vector<double> v(g.n);
    for (std::size_t i = 0; i < g.n; ++i) v[i] = 1.0 + 0.5 * std::exp(g.x(i)) + std::sin(3 * g.x(i));
    const auto d = apply_frac_derivative(v, g, 2.0);
    for (std::size_t i = 1; i + 1 < g.n; ++i) {
        const double central = (v[i + 1] - 2 * v[i] + v[i - 1]) / (g.h * g.h);
        EXPECT_NEAR(d[i], central, 1e-12 * std::max(1.0, std::abs(central))) << i;
    }
    EXPECT_TRUE(std::isnan(d.back()));
}

TEST(FracDerivative, QuadraticAtIntegerOrder) {
    const auto g = FracGrid::uniform(-1.0, 1.0, 33, Extension::function([](double x) { return x * x; }));
    std::vector<double> v(g.n);
    for (std::size_t i = 0; i < g.n; ++i) v[i] = g.x(i) * g.x(i);
    const auto d = apply_frac_derivative(v, g, 2.0);
    for (std::size_t i = 0; i + 1 < g.n; ++i) EXPECT_NEAR(d[i], 2.0, 1e-10) << i;
}

TEST(FracDerivative, ConstantsVanish) {
    for (double alpha : {1.3, 1.6, 2.0}) {
        const auto g = FracGrid::uniform(0.0, 3.0, 301, Extension::affine(4.2, 0.0));
        const std::vector<double> v(g.n, 4.2);
        const auto d = apply_frac_derivative(v, g, alpha);
        for (std::size_t i = 0; i + 1 < g.n; ++i) EXPECT_NEAR(d[i], 0.0, 1e-9) << alpha << ' ' << i;
    }
}

TEST(FracDerivative, CaputoOracleMatchesEigenvalue) {
    for (double alpha : {1.3, 1.7}) {
        for (double lambda : {0.5, 1.0}) {
            EXPECT_NEAR(caputo_exp(0.3, lambda, alpha), std::pow(lambda, alpha) * std::exp(lambda * 0.3), 1e-9);
        }
    }
}

TEST(FracDerivative, ExponentialFirstOrder) {
    for (double alpha : {1.3, 1.5, 1.8}) {
        for (double lambda : {0.5, 1.0}) {
            std::vector<double> err;
            for (std::size_t n : {101u, 201u, 401u}) {
                const auto g = FracGrid::uniform(
                    0.0, 2.0, n, Extension::function([lambda](double x) { return std::exp(lambda * x); }));
                const auto d = apply_frac_derivative(sample(g, exp_lambda, lambda), g, alpha);
                double worst = 0.0;
                for (std::size_t i = 1; i + 1 < g.n; ++i) {
                    const double oracle = caputo_exp(g.x(i), lambda, alpha);
                    worst = std::max(worst, std::abs(d[i] - oracle) / oracle);
                }
                err.push_back(worst);
            }
            for (std::size_t k = 1; k < err.size(); ++k) {
                const double slope = std::log2(err[k - 1] / err[k]);
                EXPECT_GE(slope, 0.8) << alpha << ' ' << lambda;
                EXPECT_LE(slope, 1.2) << alpha << ' ' << lambda;
            }
        }
    }
}

TEST(FracDerivative, AffineAndFunctionTailsAgree) {
    const double k = 100.0;
    for (double alpha : {1.4, 1.9}) {
        const auto ga = FracGrid::uniform(3.0, 5.0, 201, Extension::affine(k, -1.0));
        const auto gf = FracGrid::uniform(3.0, 5.0, 201, Extension::function([k](double x) { return k - std::exp(x); }));
        std::vector<double> v(ga.n);
        for (std::size_t i = 0; i < ga.n; ++i) v[i] = k - std::exp(ga.x(i));
        const auto da = apply_frac_derivative(v, ga, alpha);
        const auto df = apply_frac_derivative(v, gf, alpha);
        for (std::size_t i = 0; i + 1 < ga.n; ++i) EXPECT_NEAR(da[i], df[i], 1e-6 * std::abs(da[i]) + 1e-6) << i;
    }
}

TEST(FracDerivative, ContractErrors) {
    const auto none = FracGrid::uniform(0.0, 1.0, 20, Extension::none());
    EXPECT_THROW(apply_frac_derivative(std::vector<double>(20, 1.0), none, 1.5), ContractError);
    const auto jump = FracGrid::uniform(0.0, 1.0, 20, Extension::affine(2.0, 0.0));
    EXPECT_THROW(apply_frac_derivative(std::vector<double>(20, 1.0), jump, 1.5), ContractError);
    const auto bad = FracGrid::uniform(0.0, 1.0, 20, Extension::function([](double x) { return x < -1 ? NAN : 1.0; }));
    EXPECT_THROW(apply_frac_derivative(std::vector<double>(20, 1.0), bad, 1.5), ContractError);
    EXPECT_THROW(FracGrid::uniform(0.0, 1.0, 15, Extension::zero()), ConfigError);
    EXPECT_THROW(apply_frac_derivative(std::vector<double>(19, 0.0), FracGrid::uniform(0.0, 1.0, 20, Extension::zero()), 1.5),
                 DomainError);
}

TEST(Residual, ExactSolutionsAtNoiseLevel) {
    const OptionSpec o{100.0, 1.0};
    for (double alpha : {1.4, 1.7, 2.0}) {
        const ModelParams p{alpha, 0.25, 0.05};
        const auto g = FracGrid::uniform(2.0, 6.0, 801, Extension::affine(0.0, 1.0));
        std::vector<double> v(g.n), zero(g.n, 0.0);
        for (std::size_t i = 0; i < g.n; ++i) v[i] = std::exp(g.x(i));
        EXPECT_LT(max_interior(fpde_residual(v, zero, g, p)), 1e-9 * std::exp(6.0)) << alpha;

        const double t = 0.3;
        const double bond = o.strike * std::exp(-p.rate * (o.expiry - t));
        const auto gb = FracGrid::uniform(2.0, 6.0, 801, Extension::affine(bond, 0.0));
        const std::vector<double> b(g.n, bond), bt(g.n, p.rate * bond);
        EXPECT_LT(max_interior(fpde_residual(b, bt, gb, p)), 1e-9 * bond) << alpha;
    }
}

TEST(Residual, ObstacleSign) {
    const double k = 100.0;
    for (double alpha : {1.5, 2.0}) {
        const ModelParams p{alpha, 0.25, 0.05};
        const auto g = FracGrid::uniform(3.0, 4.4, 281, Extension::affine(k, -1.0));
        std::vector<double> v(g.n), zero(g.n, 0.0);
        for (std::size_t i = 0; i < g.n; ++i) v[i] = k - std::exp(g.x(i));
        const auto res = fpde_residual(v, zero, g, p);
        for (std::size_t i = 0; i + 1 < g.n; ++i) {
            EXPECT_LE(res[i], 1e-8 * k);
            EXPECT_NEAR(res[i], -p.rate * k, 1e-8 * k);
        }
    }
}

TEST(Residual, EuropeanFirstOrder) {
    const OptionSpec o{100.0, 1.0};
    const double lo = std::log(100.0) - 2.5, hi = std::log(100.0) + 1.5;
    for (double alpha : {1.4, 1.7, 2.0}) {
        const ModelParams p{alpha, 0.25, 0.05};
        const double r1 = european_residual(p, o, 0.5, lo, hi, 201).max_interior;
        const double r2 = european_residual(p, o, 0.5, lo, hi, 401).max_interior;
        const double r3 = european_residual(p, o, 0.5, lo, hi, 801).max_interior;
        EXPECT_GE(r1 / r2, 1.85) << alpha;
        EXPECT_GE(std::log2(r2 / r3), 0.9) << alpha;
    }
}

TEST(Residual, CsvAndDomain) {
    const ModelParams p{1.6, 0.25, 0.05};
    const OptionSpec o{100.0, 1.0};
    const auto s = european_residual(p, o, 0.5, 3.0, 5.5, 64);
    std::ostringstream os;
    write_residual_csv(os, s);
    EXPECT_EQ(os.str().substr(0, 13), "x,V,residual\n");
    EXPECT_THROW(european_residual(p, o, 0.0, 3.0, 5.5, 64), DomainError);
    EXPECT_THROW(european_residual(p, o, 0.5, 5.5, 3.0, 64), ConfigError);
}
