#pragma once

// Monte Carlo checks of the terminal law: stable variates in the density
// convention of density.hpp, European puts and the martingale condition.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "fmls/model.hpp"

namespace fmls {

struct MCConfig {
    std::uint64_t n_paths = 1'000'000;
    std::uint64_t seed = 0x5eed'f3a1'2024'0001ULL;
    bool antithetic = false;  ///< pairs (u1, u2) with (1 - u1, 1 - u2); n_paths must be even
    unsigned threads = 0;     ///< 0 = hardware concurrency; results do not depend on it

    /// Throws ConfigError on n_paths == 0 or odd n_paths with antithetic.
    void validate() const;
};

/// Paths per independently seeded block.
inline constexpr std::uint64_t kPathsPerBlock = 1u << 16;

/// Maps two uniforms in (0, 1) to a draw with E[e^{-theta M}] = e^{theta^alpha};
/// at alpha = 2 this is N(0, 2).
double stable_variate(double alpha, double u1, double u2);

/// n i.i.d. draws; bit-identical for equal (alpha, n, seed).
std::vector<double> sample_stable(double alpha, std::size_t n, std::uint64_t seed);

struct MCEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::uint64_t n_paths = 0;
};

/// Discounted mean of (K - S_T)^+ with
/// ln S_T = ln S + (r - nu) T - (nu T)^(1/alpha) M.
MCEstimate mc_european_put(double spot, const ModelParams& params, const OptionSpec& spec,
                           const MCConfig& mc);

struct MartingaleResult {
    double relative_error = 0.0;  ///< |e^{-rT} mean(S_T) / S_0 - 1|
    double std_error = 0.0;       ///< standard error of e^{-rT} S_T / S_0
    double z = 0.0;               ///< relative_error / std_error
    bool passed = false;          ///< z < 3
};

/// With drop_adjustment the drift is r instead of r - nu (negative control).
MartingaleResult martingale_check(const ModelParams& params, const MCConfig& mc, double horizon = 1.0,
                                  bool drop_adjustment = false);

/// One draw per line, header "draw".
void write_draws_csv(std::ostream& os, std::span<const double> draws);

}  // namespace fmls
