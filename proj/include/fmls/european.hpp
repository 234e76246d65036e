#pragma once

// European put in closed form, the Black-Scholes and binomial references,
// and the one-period valuation operator used by the Bermudan engine.

#include <cstddef>
#include <algorithm>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "fmls/density.hpp"
#include "fmls/model.hpp"

namespace fmls {

/// Target absolute accuracy of a single closed-form evaluation, in units of K.
inline constexpr double kPriceTolerance = 1e-6;

/// K e^{-gamma tau} int_{d1}^inf f - S e^{-tau} int_{d1}^inf e^{-tau^(1/alpha) m} f.
/// Returns the payoff exactly at t = T.
double price_put(double spot, double t, const ModelParams& params, const OptionSpec& spec,
                 const DensityTable& table);

/// Same, with the shared default-grid table for params.alpha.
double price_put(double spot, double t, const ModelParams& params, const OptionSpec& spec);

/// Classical Black-Scholes put. ttm = 0 gives the payoff.
double bs_put_reference(double spot, double strike, double rate, double sigma_bs, double ttm);

/// Cox-Ross-Rubinstein American put with the given number of steps.
double binomial_american_put(double spot, double strike, double rate, double sigma_bs, double ttm,
                             std::size_t steps);

/// One-period value x -> e^{-r dt} E[contract(x + X_dt)] for a contract
/// defined on the whole real line (extensions included by the caller).
/// Adaptive quadrature over the density; intended for checks and small
/// point sets, not for backward induction.
std::vector<double> propagate(const std::function<double(double)>& contract,
                              std::span<const double> x, double dt, const ModelParams& params,
                              const DensityTable& table);

// ---------------------------------------------------------------------------
// Lattice propagation

/// Uniform log-price lattice x_i = x0 + i h, i = 0 .. n-1.
struct LogGrid {
    double x0 = 0.0;
    double h = 0.0;
    std::size_t n = 0;

    double x(std::size_t i) const noexcept { return x0 + h * static_cast<double>(i); }
    double x_max() const noexcept { return x(n - 1); }
};

/// Contract values assumed outside the lattice: affine a + b e^x, or an
/// arbitrary function (upper side only; evaluated on the nodes above the
/// lattice that the kernel reaches).
struct Extension {
    enum class Kind { None, Affine, Function };
    Kind kind = Kind::None;
    double a = 0.0;
    double b = 0.0;
    std::function<double(double)> fn;

    bool defined() const noexcept { return kind != Kind::None; }
    static Extension affine(double a, double b) { return {Kind::Affine, a, b, {}}; }
    static Extension zero() { return affine(0.0, 0.0); }
    static Extension none() { return {}; }
    static Extension function(std::function<double(double)> f) { return {Kind::Function, 0.0, 0.0, std::move(f)}; }
};

/// Largest lattice spacing for which sampling the one-step density at
/// spacing h keeps the aliasing error of its moments below ~1e-13.
double max_lattice_spacing(const ModelParams& params, double dt);

/// Transition weights of one period of length dt on a lattice:
/// C_i = e^{-r dt} sum_j p_j V_{i+j}, p_j = (h/theta) f((-j h - (nu - r) dt) / theta),
/// theta = (nu dt)^(1/alpha). All weights are non-negative. Mass that
/// leaves the lattice is valued with the declared extensions using the
/// exact totals sum_j p_j = 1 and sum_j p_j e^{jh} = e^{r dt}, so constants
/// and e^x are propagated exactly.
class StepKernel {
public:
    StepKernel(const DensityTable& table, const ModelParams& params, double dt, const LogGrid& grid);
    ~StepKernel();
    StepKernel(StepKernel&&) noexcept;
    StepKernel& operator=(StepKernel&&) noexcept;

    double dt() const noexcept { return dt_; }
    double discount() const noexcept { return discount_; }
    std::ptrdiff_t j_lo() const noexcept { return j_lo_; }
    std::ptrdiff_t j_hi() const noexcept { return j_hi_; }
    /// p_j for j = j_lo .. j_hi.
    std::span<const double> weights() const noexcept { return weights_; }

    /// Number of nodes above the lattice the kernel reaches.
    std::size_t upward_reach() const noexcept { return static_cast<std::size_t>(std::max<std::ptrdiff_t>(j_hi_, 0)); }

    /// Transition probability of moving up by more than dx in one period.
    double upward_mass_beyond(double dx) const;

    /// Continuation values on the lattice. Throws ContractError when mass
    /// reaches a side whose extension is not defined, or when the lower
    /// extension is not affine.
    void apply(std::span<const double> v, const Extension& lower, const Extension& upper,
               std::span<double> out) const;
    std::vector<double> apply(std::span<const double> v, const Extension& lower,
                              const Extension& upper) const;

private:
    struct Fft;

    LogGrid grid_;
    double dt_ = 0.0;
    double discount_ = 1.0;
    double growth_ = 1.0;
    std::ptrdiff_t j_lo_ = 0;
    std::ptrdiff_t j_hi_ = 0;
    std::vector<double> weights_;
    std::vector<double> below_p_;  // mass landing below the lattice, per node
    std::vector<double> below_e_;  // e^{jh}-weighted mass landing below, per node
    std::vector<double> above_p_;  // mass landing above the lattice, per node
    std::vector<double> above_e_;
    std::unique_ptr<Fft> fft_;
};

/// European put on a lattice: n_steps applications of a kernel with
/// dt = ttm / n_steps, starting from the payoff; lower extension
/// K e^{-r s} - e^x at remaining time s, zero above.
std::vector<double> lattice_european_put(const DensityTable& table, const ModelParams& params,
                                         double strike, double ttm, const LogGrid& grid,
                                         std::size_t n_steps = 1);

}  // namespace fmls
