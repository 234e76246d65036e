#include "fmls/fractional.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "fmls/errors.hpp"
#include "fmls/simd/kernels.hpp"

namespace fmls {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_alpha(double alpha) {
    if (!(alpha > 1.0 && alpha <= 2.0)) throw DomainError("alpha must lie in (1, 2]");
}

double extension_at(const Extension& e, double x) {
    const double v = e.kind == Extension::Kind::Affine ? e.a + e.b * std::exp(x) : e.fn(x);
    if (!std::isfinite(v)) throw ContractError("left extension is not finite at x = " + std::to_string(x));
    return v;
}

// sum_{j >= J} w_j e^{-j h} for J = 0 .. n, accumulated backwards from a
// directly summed far tail.
std::vector<double> exp_tails(double alpha, double h, std::size_t n) {
    const double decay = std::exp(-h);
    const auto extra = static_cast<std::size_t>(std::ceil(45.0 / h)) + 64;
    double w = 1.0;
    std::vector<double> weights(n + 1);
    for (std::size_t j = 0; j <= n; ++j) {
        if (j > 0) w *= (static_cast<double>(j) - 1.0 - alpha) / static_cast<double>(j);
        weights[j] = w;
    }
    double far = 0.0;
    double wj = w;
    double ej = std::exp(-h * static_cast<double>(n));
    for (std::size_t j = n + 1; j <= n + extra; ++j) {
        wj *= (static_cast<double>(j) - 1.0 - alpha) / static_cast<double>(j);
        ej *= decay;
        far += wj * ej;
    }
    std::vector<double> tails(n + 1);
    double acc = far;
    for (std::size_t j = n + 1; j-- > 0;) {
        acc += weights[j] * std::exp(-h * static_cast<double>(j));
        tails[j] = acc;
    }
    return tails;
}

}  // namespace

FracGrid FracGrid::uniform(double x_min, double x_max, std::size_t n, Extension left_extension) {
    if (n < 16) throw ConfigError("fractional grid needs at least 16 nodes");
    if (!(x_min < x_max) || !std::isfinite(x_min) || !std::isfinite(x_max)) {
        throw ConfigError("fractional grid needs x_min < x_max");
    }
    FracGrid g;
    g.x_min = x_min;
    g.x_max = x_max;
    g.n = n;
    g.h = (x_max - x_min) / static_cast<double>(n - 1);
    g.left_extension = std::move(left_extension);
    return g;
}

std::vector<double> gl_weights(double alpha, std::size_t n_terms) {
    check_alpha(alpha);
    if (n_terms < 2) throw DomainError("gl_weights needs at least two terms");
    std::vector<double> w(n_terms);
    w[0] = 1.0;
    for (std::size_t j = 1; j < n_terms; ++j) {
        w[j] = w[j - 1] * (static_cast<double>(j) - 1.0 - alpha) / static_cast<double>(j);
    }
    return w;
}

std::vector<double> apply_frac_derivative(std::span<const double> values, const FracGrid& grid,
                                          double alpha) {
    check_alpha(alpha);
    const std::size_t n = grid.n;
    if (values.size() != n) throw DomainError("values do not match the grid");
    if (!grid.left_extension.defined()) throw ContractError("fractional derivative needs a left extension");
    for (double v : values) {
        if (!std::isfinite(v)) throw DomainError("values must be finite");
    }
    const Extension& ext = grid.left_extension;
    const double e0 = extension_at(ext, grid.x_min);
    if (std::abs(e0 - values[0]) > 1e-8 * std::max(1.0, std::abs(values[0]))) {
        throw ContractError("left extension is discontinuous at x_min");
    }

    const double h = grid.h;
    const double scale = std::pow(h, -alpha);
    const auto w = gl_weights(alpha, n + 1);
    std::vector<double> reversed(values.rbegin(), values.rend());
    std::vector<double> out(n, kNaN);

    if (ext.kind == Extension::Kind::Affine) {
        // sum_{j >= J} w_j = -(-1)^{J-1} binom(alpha - 1, J - 1)
        std::vector<double> lower(n + 1);
        double g = 1.0;
        for (std::size_t m = 0; m <= n; ++m) {
            if (m > 0) g *= (static_cast<double>(m) - alpha) / static_cast<double>(m);
            lower[m] = g;
        }
        const auto etail = exp_tails(alpha, h, n + 1);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const std::size_t J = i + 2;
            const double head = simd::dot(std::span<const double>(w).first(J),
                                          std::span<const double>(reversed).subspan(n - J, J));
            const double tail = ext.a * -lower[J - 1] + ext.b * std::exp(grid.x(i + 1)) * etail[J];
            out[i] = scale * (head + tail);
        }
        return out;
    }

    const std::size_t q_max = kFunctionTailTerms;
    std::vector<double> ext_vals(q_max);  // V(x_min - q h), q = 1 .. q_max
    for (std::size_t q = 1; q <= q_max; ++q) {
        ext_vals[q - 1] = extension_at(ext, grid.x_min - h * static_cast<double>(q));
    }
    const auto wall = gl_weights(alpha, n + q_max + 1);
    std::vector<double> lower(n + q_max + 1);
    double g = 1.0;
    for (std::size_t m = 0; m < lower.size(); ++m) {
        if (m > 0) g *= (static_cast<double>(m) - alpha) / static_cast<double>(m);
        lower[m] = g;
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::size_t J = i + 2;
        const double head = simd::dot(std::span<const double>(wall).first(J),
                                      std::span<const double>(reversed).subspan(n - J, J));
        const double mid = simd::dot(std::span<const double>(wall).subspan(J, q_max), ext_vals);
        const double rest = ext_vals.back() * -lower[J + q_max - 1];
        out[i] = scale * (head + mid + rest);
    }
    return out;
}

std::vector<double> fpde_residual(std::span<const double> values, std::span<const double> dvdt,
                                  const FracGrid& grid, const ModelParams& params) {
    params.validate();
    if (dvdt.size() != values.size()) throw DomainError("time derivative does not match the values");
    const double alpha = params.alpha;
    const double h = grid.h;
    const double nu = convexity_adjustment(alpha, params.sigma);
    const double r = params.rate;
    const auto d = apply_frac_derivative(values, grid, alpha);
    const double fit_frac = std::pow(h, alpha) * std::exp(-h) * std::pow(-std::expm1(-h), -alpha);
    const double fit_first = h / std::sinh(h);
    const double left = extension_at(grid.left_extension, grid.x_min - h);
    std::vector<double> out(grid.n, kNaN);
    for (std::size_t i = 0; i + 1 < grid.n; ++i) {
        const double below = i == 0 ? left : values[i - 1];
        const double vx = fit_first * (values[i + 1] - below) / (2.0 * h);
        out[i] = dvdt[i] + (r - nu) * vx + nu * fit_frac * d[i] - r * values[i];
    }
    return out;
}

double max_interior(std::span<const double> residual) {
    double m = 0.0;
    for (std::size_t i = 1; i + 1 < residual.size(); ++i) m = std::max(m, std::abs(residual[i]));
    return m;
}

ResidualSlice european_residual(const ModelParams& params, const OptionSpec& spec, double t,
                                double x_min, double x_max, std::size_t n) {
    params.validate();
    spec.validate();
    const double nu = convexity_adjustment(params.alpha, params.sigma);
    const double dt = kResidualTimeStep / nu;
    if (!(t - dt > 0.0 && t + dt < spec.expiry)) {
        throw DomainError("residual slice needs t strictly inside (0, T) by one time step");
    }
    const double kd = spec.strike * std::exp(-params.rate * (spec.expiry - t));
    const FracGrid grid = FracGrid::uniform(x_min, x_max, n, Extension::affine(kd, -1.0));
    const DensityTable& table = shared_table(params.alpha);
    ResidualSlice s;
    s.x.resize(n);
    s.value.resize(n);
    s.dvdt.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double spot = std::exp(grid.x(i));
        s.x[i] = grid.x(i);
        s.value[i] = price_put(spot, t, params, spec, table);
        s.dvdt[i] = (price_put(spot, t + dt, params, spec, table) - price_put(spot, t - dt, params, spec, table)) /
                    (2.0 * dt);
    }
    s.residual = fpde_residual(s.value, s.dvdt, grid, params);
    s.max_interior = max_interior(s.residual);
    return s;
}

void write_residual_csv(std::ostream& os, const ResidualSlice& slice) {
    os << "x,V,residual\n";
    os.precision(12);
    for (std::size_t i = 0; i < slice.x.size(); ++i) {
        os << slice.x[i] << ',' << slice.value[i] << ',';
        if (std::isfinite(slice.residual[i])) os << slice.residual[i];
        os << '\n';
    }
}

}  // namespace fmls
