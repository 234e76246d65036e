#pragma once

// Shifted Grunwald-Letnikov discretization of the left-sided fractional
// derivative D_x^alpha and the residual of the pricing equation
//   V_t + (r - nu) V_x + nu D_x^alpha V - r V = 0.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "fmls/european.hpp"
#include "fmls/model.hpp"

namespace fmls {

/// Uniform log-price grid plus the values assumed on (-inf, x_min).
struct FracGrid {
    double x_min = 0.0;
    double x_max = 0.0;
    double h = 0.0;
    std::size_t n = 0;
    /// Affine a + b e^x (summed exactly) or an arbitrary function.
    Extension left_extension;

    /// Throws ConfigError unless n >= 16 and x_min < x_max.
    static FracGrid uniform(double x_min, double x_max, std::size_t n, Extension left_extension);

    double x(std::size_t i) const noexcept { return x_min + h * static_cast<double>(i); }
};

/// w_0 = 1, w_j = w_{j-1} (j - 1 - alpha) / j. Throws DomainError unless
/// 1 < alpha <= 2 and n_terms >= 2.
std::vector<double> gl_weights(double alpha, std::size_t n_terms);

/// Number of extension samples used when the left extension is a general
/// function; beyond them the last sample is held constant.
inline constexpr std::size_t kFunctionTailTerms = std::size_t{1} << 15;

/// h^-alpha sum_{j>=0} w_j V(x_i - (j - 1) h) at every node. The last node
/// needs V(x_max + h) and is returned as NaN. Throws ContractError when the
/// extension is missing, non-finite, or off the grid value at x_min by more
/// than 1e-8 (relative to max(1, |V_0|)).
std::vector<double> apply_frac_derivative(std::span<const double> values, const FracGrid& grid,
                                          double alpha);

/// Pointwise residual of the pricing equation with the spatial operators
/// exponentially fitted so that e^x and constants are reproduced exactly.
/// dvdt is the calendar-time derivative. The last node is NaN.
std::vector<double> fpde_residual(std::span<const double> values, std::span<const double> dvdt,
                                  const FracGrid& grid, const ModelParams& params);

/// Step in reduced time used for centred time differences.
inline constexpr double kResidualTimeStep = 1e-4;

struct ResidualSlice {
    std::vector<double> x;
    std::vector<double> value;
    std::vector<double> dvdt;
    std::vector<double> residual;
    double max_interior = 0.0;  ///< max |residual| over nodes 1 .. n-2
};

/// Closed-form European put at calendar time t (0 < t < T) on
/// [x_min, x_max] with n nodes; left extension K e^{-r(T-t)} - e^x.
ResidualSlice european_residual(const ModelParams& params, const OptionSpec& spec, double t,
                                double x_min, double x_max, std::size_t n);

/// Max |r_i| over nodes 1 .. n-2.
double max_interior(std::span<const double> residual);

/// CSV x,V,residual.
void write_residual_csv(std::ostream& os, const ResidualSlice& slice);

}  // namespace fmls
