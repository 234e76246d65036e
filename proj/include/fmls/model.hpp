#pragma once

// Model parameters and the reduced coordinates shared by every pricer.
//
// Conventions: x = ln S is the log-price; the convexity adjustment
// nu = -1/2 sigma^alpha sec(alpha pi / 2) is positive on (1, 2]; the reduced
// time-to-expiry is tau = nu (T - t) and the relative rate gamma = r / nu.

namespace fmls {

/// Market and model inputs. Skew is fixed at -1 (maximally skewed driver).
struct ModelParams {
    double alpha = 1.4;  ///< tail index, 1 < alpha <= 2
    double sigma = 0.25; ///< scale, per year^(1/alpha)
    double rate = 0.05;  ///< risk-free rate

    static constexpr double skew = -1.0;

    /// Throws DomainError unless 1 < alpha <= 2, sigma > 0, rate >= 0.
    void validate() const;
};

/// European/American put contract.
struct OptionSpec {
    double strike = 100.0;
    double expiry = 1.0;

    void validate() const;
};

struct ReducedCoords {
    double nu = 0.0;
    double gamma = 0.0;
    double tau = 0.0;
};

/// How sigma is chosen when sweeping alpha.
enum class VolNormalization {
    FixedSigma, ///< sigma(alpha) = sigma_bs for every alpha
    MatchedNu,  ///< sigma(alpha) solves nu(alpha, sigma) = nu(2, sigma_bs)
};

/// nu = -1/2 sigma^alpha sec(alpha pi / 2). Equals sigma^2 / 2 at alpha = 2.
double convexity_adjustment(double alpha, double sigma);

/// The SDE-form quantity sigma^alpha sec(alpha pi / 2) = -2 nu.
double drift_adjustment(double alpha, double sigma);

/// Reduced coordinates at calendar time t. Requires 0 <= t <= T.
ReducedCoords to_reduced(double t, const ModelParams& params, const OptionSpec& spec);

/// Reduced coordinates for a time-to-expiry ttm >= 0.
ReducedCoords reduced_for_ttm(double ttm, const ModelParams& params);

/// (K - S)^+.
double payoff_put(double spot, double strike);

/// (x - ln K - (1 - gamma) tau) / tau^(1/alpha). Requires tau > 0.
double d1(double x, double strike, const ReducedCoords& coords, double alpha);

/// Sigma to use at tail index alpha for a sweep anchored at sigma_bs.
double normalized_sigma(double alpha, double sigma_bs, VolNormalization mode);

}  // namespace fmls
