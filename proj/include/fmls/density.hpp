#pragma once

// Maximally skewed alpha-stable density f, the Green's function of the
// fractional diffusion d/dtau u = D^alpha u. Its characteristic function is
// E[exp(i k M)] = exp((-i k)^alpha): the right tail is a power law
// f(m) ~ m^(-1-alpha) / Gamma(-alpha), the left tail is lighter than any
// exponential, E[exp(-theta M)] = exp(theta^alpha), and at alpha = 2 the
// law is Gaussian with variance 2.

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace fmls {

/// (i k)^alpha on the principal branch. Real part <= 0 for alpha in (1, 2].
std::complex<double> char_exponent(double k, double alpha);

struct DensityValue {
    double value = 0.0;
    double error_estimate = 0.0;
    std::size_t nodes = 0;
};

/// Density with an a-posteriori error estimate; refines until the estimate
/// is below tol. Throws NumericalAccuracyError carrying the achieved
/// estimate when the node budget runs out.
DensityValue density_with_error(double m, double alpha, double tol = 1e-12);

/// Density value only; see density_with_error.
double density(double m, double alpha, double tol = 1e-12);

/// Right-tail asymptotic series sum_n m^(-n alpha - 1) / (n! Gamma(-n alpha)).
/// Accurate for m well past the mode (m >= ~50).
double density_asymptotic(double m, double alpha);

/// Integral of the asymptotic series over [r, inf).
double tail_mass_asymptotic(double r, double alpha);

/// Integral of exp(-theta m) times the asymptotic series over [r, inf).
double exp_weighted_tail_asymptotic(double r, double theta, double alpha);

struct DensityGridSpec {
    double left = -40.0;
    double right = 200.0;
    double spacing = 0.01;
};

/// Tabulated density on a uniform grid with the analytic right tail beyond
/// right_cut and zero below left_cut. Immutable after construction.
class DensityTable {
public:
    /// Throws NumericalAccuracyError if normalization misses 1 by > 1e-6.
    static DensityTable build(double alpha, const DensityGridSpec& grid = {});

    double alpha() const noexcept { return alpha_; }
    double left_cut() const noexcept { return left_; }
    double right_cut() const noexcept { return left_ + spacing_ * static_cast<double>(values_.size() - 1); }
    double spacing() const noexcept { return spacing_; }
    double tail_exponent() const noexcept { return tail_exponent_; }
    std::span<const double> values() const noexcept { return values_; }
    std::vector<double> abscissae() const;

    /// Interpolated density; asymptotic series past right_cut, zero below left_cut.
    double operator()(double m) const;

    /// Integral of f over [d, inf). Non-increasing in d, in [0, 1].
    double tail_integral(double d) const;

    /// Part of tail_integral(d) supplied by the asymptotic series.
    double extrapolated_mass(double d) const;

    /// True when tail_integral(d) relies on more than 1e-4 of extrapolated mass.
    bool extrapolation_flag(double d) const { return extrapolated_mass(d) > 1e-4; }

    /// Integral of exp(-theta m) f(m) over [d, inf), theta >= 0. Throws
    /// NumericalAccuracyError when theta is too large for the left window.
    double exp_weighted_integral(double d, double theta) const;

    /// Same, with d = -inf.
    double exp_moment(double theta) const;

    /// |integral of f - 1|.
    double normalization_error() const;

    /// Largest exp(-theta m) f(m) / exp(theta^alpha) over the left window
    /// [left_cut, left_cut + 5]. Must be negligible for exp_weighted_integral.
    double left_tail_margin(double theta) const;

    /// CSV with header "m,f".
    void write_csv(std::ostream& os) const;

private:
    DensityTable() = default;

    double node(std::size_t k) const noexcept { return left_ + spacing_ * static_cast<double>(k); }
    // Integral of g over [d, node(k+1)] where node(k) <= d < node(k+1), using
    // the cubic interpolant through the four surrounding nodes.
    template <class G>
    double partial_cell(std::size_t k, double d, G&& g) const;

    double alpha_ = 2.0;
    double left_ = -40.0;
    double spacing_ = 0.01;
    std::vector<double> values_;
    std::vector<double> cumulative_;  // integral from node k to right_cut
    double tail_mass_ = 0.0;          // asymptotic mass beyond right_cut
    double tail_exponent_ = 0.0;
};

/// Builds the table; equivalent to DensityTable::build.
DensityTable build_table(double alpha, const DensityGridSpec& grid = {});

/// Process-wide cache of default-grid tables keyed by alpha. Thread-safe;
/// the returned reference stays valid for the life of the process.
const DensityTable& shared_table(double alpha);

}  // namespace fmls
