#include "fmls/model.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "fmls/errors.hpp"

namespace fmls {

namespace {

// sec(alpha pi / 2) is singular at alpha = 1; nu blows up like 1/(alpha - 1).
constexpr double kMinAbsCos = 1e-8;

double checked_cos(double alpha) {
    if (!(alpha > 1.0 && alpha <= 2.0)) {
        throw DomainError("tail index must lie in (1, 2], got " + std::to_string(alpha));
    }
    const double c = std::cos(alpha * std::numbers::pi / 2.0);
    if (std::abs(c) < kMinAbsCos) {
        throw DomainError("tail index too close to 1: sec(alpha pi/2) overflows");
    }
    return c;
}

}  // namespace

void ModelParams::validate() const {
    checked_cos(alpha);
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw DomainError("sigma must be positive");
    }
    if (!(rate >= 0.0) || !std::isfinite(rate)) {
        throw DomainError("rate must be non-negative");
    }
}

void OptionSpec::validate() const {
    if (!(strike > 0.0) || !std::isfinite(strike)) throw DomainError("strike must be positive");
    if (!(expiry > 0.0) || !std::isfinite(expiry)) throw DomainError("expiry must be positive");
}

double convexity_adjustment(double alpha, double sigma) {
    const double c = checked_cos(alpha);
    if (!(sigma > 0.0)) throw DomainError("sigma must be positive");
    if (alpha == 2.0) return 0.5 * sigma * sigma;
    return -0.5 * std::pow(sigma, alpha) / c;
}

double drift_adjustment(double alpha, double sigma) {
    return -2.0 * convexity_adjustment(alpha, sigma);
}

ReducedCoords reduced_for_ttm(double ttm, const ModelParams& params) {
    params.validate();
    if (!(ttm >= 0.0)) throw DomainError("time to expiry must be non-negative");
    ReducedCoords rc;
    rc.nu = convexity_adjustment(params.alpha, params.sigma);
    rc.gamma = params.rate / rc.nu;
    rc.tau = rc.nu * ttm;
    return rc;
}

ReducedCoords to_reduced(double t, const ModelParams& params, const OptionSpec& spec) {
    spec.validate();
    if (t < 0.0 || t > spec.expiry) {
        throw DomainError("t must lie in [0, T]");
    }
    // T - t is computed once so that tau is exactly zero at t = T.
    return reduced_for_ttm(spec.expiry - t, params);
}

double payoff_put(double spot, double strike) {
    if (spot < 0.0) throw DomainError("negative spot");
    return spot < strike ? strike - spot : 0.0;
}

double d1(double x, double strike, const ReducedCoords& coords, double alpha) {
    if (!(coords.tau > 0.0)) {
        throw DomainError("d1 undefined at tau = 0; use the terminal payoff");
    }
    const double num = x - std::log(strike) - (1.0 - coords.gamma) * coords.tau;
    return num / std::pow(coords.tau, 1.0 / alpha);
}

double normalized_sigma(double alpha, double sigma_bs, VolNormalization mode) {
    checked_cos(alpha);
    if (!(sigma_bs > 0.0)) throw ConfigError("sigma_bs must be positive");
    switch (mode) {
        case VolNormalization::FixedSigma:
            return sigma_bs;
        case VolNormalization::MatchedNu: {
            // sigma^alpha = -2 nu_bs cos(alpha pi / 2), nu_bs = sigma_bs^2 / 2.
            const double target = -sigma_bs * sigma_bs * std::cos(alpha * std::numbers::pi / 2.0);
            if (!(target > 0.0)) throw ConfigError("volatility normalization failed");
            return alpha == 2.0 ? sigma_bs : std::pow(target, 1.0 / alpha);
        }
    }
    throw ConfigError("unknown volatility normalization");
}

}  // namespace fmls
