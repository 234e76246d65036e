#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fmls/errors.hpp"
#include "fmls/model.hpp"

using namespace fmls;

TEST(ConvexityAdjustment, GaussianLimitIsHalfSigmaSquared) {
    EXPECT_EQ(convexity_adjustment(2.0, 0.25), 0.03125);
}

TEST(ConvexityAdjustment, AlphaOnePointFive) {
    const double expected = -0.5 * std::pow(0.25, 1.5) * (-std::numbers::sqrt2);
    EXPECT_NEAR(convexity_adjustment(1.5, 0.25), expected, 1e-15);
    EXPECT_NEAR(convexity_adjustment(1.5, 0.25), 0.0883883476, 1e-9);
}

TEST(ConvexityAdjustment, RejectsSingularAndOutOfRange) {
    EXPECT_THROW(convexity_adjustment(1.0 + 1e-12, 0.25), DomainError);
    EXPECT_THROW(convexity_adjustment(1.0, 0.25), DomainError);
    EXPECT_THROW(convexity_adjustment(2.1, 0.25), DomainError);
    EXPECT_THROW(convexity_adjustment(1.5, 0.0), DomainError);
}

TEST(ConvexityAdjustment, PositiveOnDomain) {
    for (double a = 1.01; a <= 2.0; a += 0.01) {
        for (double s : {0.05, 0.25, 1.0, 3.0}) EXPECT_GT(convexity_adjustment(a, s), 0.0);
    }
    EXPECT_DOUBLE_EQ(drift_adjustment(1.7, 0.3), -2.0 * convexity_adjustment(1.7, 0.3));
}

TEST(ConvexityAdjustment, DecreasesInAlphaNearTwoAtFixedSigma) {
    const double s = normalized_sigma(1.95, 0.25, VolNormalization::FixedSigma);
    for (double a : {1.9, 1.95, 1.99}) {
        const double h = 1e-5;
        const double d = (convexity_adjustment(a + h, s) - convexity_adjustment(a - h, s)) / (2 * h);
        EXPECT_LT(d, 0.0) << a;
    }
}

TEST(NormalizedSigma, MatchedNuReproducesGaussianNu) {
    for (double a : {1.3, 1.5, 1.8, 2.0}) {
        const double s = normalized_sigma(a, 0.25, VolNormalization::MatchedNu);
        EXPECT_NEAR(convexity_adjustment(a, s), 0.03125, 1e-15);
    }
    EXPECT_EQ(normalized_sigma(1.4, 0.25, VolNormalization::FixedSigma), 0.25);
}

TEST(ToReduced, GaussianExample) {
    ModelParams p{2.0, 0.25, 0.05};
    OptionSpec o{100.0, 1.0};
    const auto rc = to_reduced(0.0, p, o);
    EXPECT_DOUBLE_EQ(rc.nu, 0.03125);
    EXPECT_DOUBLE_EQ(rc.gamma, 1.6);
    EXPECT_DOUBLE_EQ(rc.tau, 0.03125);
}

TEST(ToReduced, ZeroAtExpiryAndRejectsLateTimes) {
    ModelParams p{1.4, 0.3, 0.02};
    OptionSpec o{100.0, 0.7};
    EXPECT_EQ(to_reduced(0.7, p, o).tau, 0.0);
    EXPECT_THROW(to_reduced(0.71, p, o), DomainError);
    EXPECT_THROW(to_reduced(-0.1, p, o), DomainError);
}

TEST(ToReduced, DiscountProductIsAlphaIndependent) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> ua(1.05, 2.0), us(0.05, 1.0), ur(0.0, 0.2), ut(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        ModelParams p{ua(rng), us(rng), ur(rng)};
        OptionSpec o{100.0, 2.0};
        const double t = 2.0 * ut(rng);
        const auto rc = to_reduced(t, p, o);
        EXPECT_NEAR(rc.gamma * rc.tau, p.rate * (2.0 - t), 1e-15);
    }
}

TEST(ToReduced, ZeroRateGivesZeroGamma) {
    ModelParams p{1.5, 0.25, 0.0};
    EXPECT_EQ(to_reduced(0.0, p, OptionSpec{}).gamma, 0.0);
}

TEST(Payoff, Examples) {
    EXPECT_EQ(payoff_put(80, 100), 20);
    EXPECT_EQ(payoff_put(100, 100), 0);
    EXPECT_EQ(payoff_put(150, 100), 0);
    EXPECT_THROW(payoff_put(-1, 100), DomainError);
}

TEST(Payoff, ConvexOnGrid) {
    for (double h : {0.37, 1.0, 3.3}) {
        for (double s = h; s < 200; s += h) {
            EXPECT_GE(payoff_put(s - h, 100) - 2 * payoff_put(s, 100) + payoff_put(s + h, 100), -1e-12);
        }
    }
}

TEST(D1, VanishesAtShiftedStrike) {
    ModelParams p{1.6, 0.2, 0.05};
    const auto rc = reduced_for_ttm(0.5, p);
    const double x = std::log(100.0) + (1.0 - rc.gamma) * rc.tau;
    EXPECT_NEAR(d1(x, 100.0, rc, p.alpha), 0.0, 1e-12);
}

TEST(D1, GaussianExample) {
    ModelParams p{2.0, 0.25, 0.05};
    const auto rc = reduced_for_ttm(1.0, p);
    EXPECT_NEAR(d1(std::log(100.0), 100.0, rc, 2.0), 0.6 * 0.03125 / std::sqrt(0.03125), 1e-14);
    EXPECT_NEAR(d1(std::log(100.0), 100.0, rc, 2.0), 0.1060660, 1e-7);
}

TEST(D1, IncreasingInXAndRejectsZeroTau) {
    ModelParams p{1.4, 0.25, 0.05};
    const auto rc = reduced_for_ttm(1.0, p);
    for (double x = 3.0; x < 6.0; x += 0.1) {
        EXPECT_LT(d1(x, 100, rc, 1.4), d1(x + 0.01, 100, rc, 1.4));
    }
    EXPECT_THROW(d1(4.6, 100, reduced_for_ttm(0.0, p), 1.4), DomainError);
}

TEST(D1, IncreasesWithAlphaAtLargeX) {
    const double x = std::log(100.0) + 1.0;
    for (double a : {1.5, 1.7, 1.9}) {
        auto at = [&](double aa) {
            ModelParams p{aa, 0.25, 0.05};
            return d1(x, 100.0, reduced_for_ttm(1.0, p), aa);
        };
        const double h = 1e-5;
        EXPECT_GT((at(a + h) - at(a - h)) / (2 * h), 0.0) << a;
    }
}

TEST(Params, Validate) {
    EXPECT_THROW((ModelParams{1.5, 0.25, -0.01}.validate()), DomainError);
    EXPECT_THROW((ModelParams{1.5, -0.25, 0.01}.validate()), DomainError);
    EXPECT_THROW((OptionSpec{0.0, 1.0}.validate()), DomainError);
    EXPECT_THROW((OptionSpec{100.0, 0.0}.validate()), DomainError);
    EXPECT_NO_THROW((ModelParams{2.0, 0.25, 0.0}.validate()));
}
