#include "fmls/european.hpp"

#include <fftw3.h>

#include <algorithm>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>

#include "fmls/errors.hpp"

namespace fmls {

namespace {

constexpr double kPi = std::numbers::pi;
// Weights this small at the upward end of the kernel are dropped.
constexpr double kWeightFloor = 1e-20;
// exp(-kAliasDecay) bounds the characteristic function at the lattice frequency.
constexpr double kAliasDecay = 30.0;

std::mutex& fftw_planner_mutex() {
    static std::mutex mu;
    return mu;
}

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

void check_table(const DensityTable& table, const ModelParams& params) {
    if (table.alpha() != params.alpha) {
        throw DomainError("density table built for a different tail index");
    }
}

}  // namespace

double price_put(double spot, double t, const ModelParams& params, const OptionSpec& spec,
                 const DensityTable& table) {
    params.validate();
    spec.validate();
    check_table(table, params);
    if (!(spot > 0.0)) throw DomainError("spot must be positive");
    if (t < 0.0 || t > spec.expiry) throw DomainError("t must lie in [0, T]");
    if (t == spec.expiry) return payoff_put(spot, spec.strike);

    const ReducedCoords rc = to_reduced(t, params, spec);
    const double theta = std::pow(rc.tau, 1.0 / params.alpha);
    const double d = d1(std::log(spot), spec.strike, rc, params.alpha);
    const double discount = std::exp(-params.rate * (spec.expiry - t));
    return spec.strike * discount * table.tail_integral(d) -
           spot * std::exp(-rc.tau) * table.exp_weighted_integral(d, theta);
}

double price_put(double spot, double t, const ModelParams& params, const OptionSpec& spec) {
    params.validate();
    return price_put(spot, t, params, spec, shared_table(params.alpha));
}

double bs_put_reference(double spot, double strike, double rate, double sigma_bs, double ttm) {
    if (!(spot >= 0.0) || !(strike > 0.0) || !(rate >= 0.0) || !(sigma_bs >= 0.0) || !(ttm >= 0.0)) {
        throw DomainError("bs_put_reference: invalid inputs");
    }
    const double disc_k = strike * std::exp(-rate * ttm);
    const double vol = sigma_bs * std::sqrt(ttm);
    if (vol == 0.0 || spot == 0.0) return std::max(disc_k - spot, 0.0);
    const double dp = (std::log(spot / strike) + rate * ttm) / vol + 0.5 * vol;
    const double dm = dp - vol;
    return disc_k * norm_cdf(-dm) - spot * norm_cdf(-dp);
}

double binomial_american_put(double spot, double strike, double rate, double sigma_bs, double ttm,
                             std::size_t steps) {
    if (!(spot > 0.0) || !(strike > 0.0) || !(rate >= 0.0) || !(sigma_bs > 0.0) || !(ttm > 0.0) ||
        steps == 0) {
        throw DomainError("binomial_american_put: invalid inputs");
    }
    const double dt = ttm / static_cast<double>(steps);
    const double u = std::exp(sigma_bs * std::sqrt(dt));
    const double d = 1.0 / u;
    const double disc = std::exp(-rate * dt);
    const double p = (std::exp(rate * dt) - d) / (u - d);
    std::vector<double> v(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) {
        const double s = spot * std::pow(u, 2.0 * static_cast<double>(k) - static_cast<double>(steps));
        v[k] = std::max(strike - s, 0.0);
    }
    for (std::size_t n = steps; n-- > 0;) {
        for (std::size_t k = 0; k <= n; ++k) {
            const double s = spot * std::pow(u, 2.0 * static_cast<double>(k) - static_cast<double>(n));
            const double cont = disc * (p * v[k + 1] + (1.0 - p) * v[k]);
            v[k] = std::max(cont, strike - s);
        }
    }
    return v[0];
}

std::vector<double> propagate(const std::function<double(double)>& contract,
                              std::span<const double> x, double dt, const ModelParams& params,
                              const DensityTable& table) {
    params.validate();
    check_table(table, params);
    if (!(dt > 0.0)) throw DomainError("dt must be positive");
    if (!contract) throw ContractError("no contract function");
    const ReducedCoords rc = reduced_for_ttm(dt, params);
    const double theta = std::pow(rc.tau, 1.0 / params.alpha);
    const double shift = rc.tau - params.rate * dt;  // (1 - gamma) tau
    const double discount = std::exp(-params.rate * dt);
    const double lo = table.left_cut();
    const double hi = table.right_cut();
    const double breaks[] = {lo, -5.0, -1.0, 1.0, 5.0, 30.0, hi};

    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double base = x[i] - shift;
        auto body = [&](double m) { return contract(base - theta * m) * table(m); };
        double total = 0.0;
        for (std::size_t s = 0; s + 1 < std::size(breaks); ++s) {
            total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
                body, breaks[s], breaks[s + 1], 15, 1e-11);
        }
        if (params.alpha < 2.0) {
            boost::math::quadrature::exp_sinh<double> tail;
            total += tail.integrate(
                [&](double u) {
                    const double m = hi + u;
                    return contract(base - theta * m) * density_asymptotic(m, params.alpha);
                },
                1e-12);
        }
        out[i] = discount * total;
    }
    return out;
}

// ---------------------------------------------------------------------------

double max_lattice_spacing(const ModelParams& params, double dt) {
    params.validate();
    if (!(dt > 0.0)) throw DomainError("dt must be positive");
    const double tau = convexity_adjustment(params.alpha, params.sigma) * dt;
    const double theta = std::pow(tau, 1.0 / params.alpha);
    const double c = params.alpha == 2.0 ? 1.0 : std::abs(std::cos(params.alpha * kPi / 2.0));
    return 2.0 * kPi * theta * std::pow(c / kAliasDecay, 1.0 / params.alpha);
}

struct StepKernel::Fft {
    std::size_t size = 0;
    std::vector<std::complex<double>> kernel_hat;
    fftw_plan forward = nullptr;
    fftw_plan inverse = nullptr;

    ~Fft() {
        std::lock_guard lock(fftw_planner_mutex());
        if (forward) fftw_destroy_plan(forward);
        if (inverse) fftw_destroy_plan(inverse);
    }
};

StepKernel::StepKernel(const DensityTable& table, const ModelParams& params, double dt,
                       const LogGrid& grid)
    : grid_(grid), dt_(dt) {
    params.validate();
    check_table(table, params);
    if (!(dt > 0.0)) throw DomainError("dt must be positive");
    if (grid.n < 4 || !(grid.h > 0.0)) throw ConfigError("lattice needs n >= 4 and h > 0");
    const double hmax = max_lattice_spacing(params, dt);
    if (grid.h > hmax) {
        throw ConfigError("lattice spacing " + std::to_string(grid.h) +
                          " too coarse for step dt; need h <= " + std::to_string(hmax));
    }
    const ReducedCoords rc = reduced_for_ttm(dt, params);
    const double theta = std::pow(rc.tau, 1.0 / params.alpha);
    const double shift = rc.tau - params.rate * dt;  // (1 - gamma) tau
    discount_ = std::exp(-params.rate * dt);
    growth_ = std::exp(params.rate * dt);

    const auto n = static_cast<std::ptrdiff_t>(grid.n);
    j_lo_ = -(n - 1);
    auto weight = [&](std::ptrdiff_t j) {
        const double m = (-static_cast<double>(j) * grid.h - shift) / theta;
        return grid.h / theta * table(m);
    };
    const double m_floor = table.left_cut();
    j_hi_ = static_cast<std::ptrdiff_t>(std::floor((-m_floor * theta - shift) / grid.h));
    j_hi_ = std::max<std::ptrdiff_t>(j_hi_, 0);
    while (j_hi_ > 0 && weight(j_hi_) < kWeightFloor) --j_hi_;

    weights_.resize(static_cast<std::size_t>(j_hi_ - j_lo_ + 1));
    for (std::ptrdiff_t j = j_lo_; j <= j_hi_; ++j) weights_[static_cast<std::size_t>(j - j_lo_)] = weight(j);

    // Suffix sums over j >= j0 of p_j and p_j e^{jh}.
    const std::size_t len = weights_.size();
    std::vector<long double> sp(len + 1, 0.0L), se(len + 1, 0.0L);
    for (std::size_t k = len; k-- > 0;) {
        const double j = static_cast<double>(static_cast<std::ptrdiff_t>(k) + j_lo_);
        sp[k] = sp[k + 1] + weights_[k];
        se[k] = se[k + 1] + static_cast<long double>(weights_[k]) * std::exp(j * grid.h);
    }
    auto suffix = [&](const std::vector<long double>& s, std::ptrdiff_t j0) -> long double {
        if (j0 > j_hi_) return 0.0L;
        return s[static_cast<std::size_t>(std::max(j0, j_lo_) - j_lo_)];
    };
    below_p_.resize(grid.n);
    below_e_.resize(grid.n);
    above_p_.resize(grid.n);
    above_e_.resize(grid.n);
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        below_p_[k] = std::max(0.0, static_cast<double>(1.0L - suffix(sp, -i)));
        below_e_[k] = std::max(0.0, static_cast<double>(static_cast<long double>(growth_) - suffix(se, -i)));
        above_p_[k] = static_cast<double>(suffix(sp, n - i));
        above_e_[k] = static_cast<double>(suffix(se, n - i));
    }

    // Correlation out_i = sum_j p_j v_{i+j} as a linear convolution with
    // r_u = p_{j_hi - u}.
    fft_ = std::make_unique<Fft>();
    std::size_t size = 1;
    // Room for the lattice plus the nodes above it that the kernel reaches.
    while (size < grid.n + upward_reach() + len) size <<= 1;
    fft_->size = size;
    double* buf = fftw_alloc_real(size);
    fftw_complex* spec = fftw_alloc_complex(size / 2 + 1);
    {
        std::lock_guard lock(fftw_planner_mutex());
        fft_->forward = fftw_plan_dft_r2c_1d(static_cast<int>(size), buf, spec, FFTW_ESTIMATE);
        fft_->inverse = fftw_plan_dft_c2r_1d(static_cast<int>(size), spec, buf, FFTW_ESTIMATE);
    }
    std::fill(buf, buf + size, 0.0);
    for (std::size_t u = 0; u < len; ++u) buf[u] = weights_[len - 1 - u];
    fftw_execute_dft_r2c(fft_->forward, buf, spec);
    fft_->kernel_hat.resize(size / 2 + 1);
    for (std::size_t k = 0; k <= size / 2; ++k) fft_->kernel_hat[k] = {spec[k][0], spec[k][1]};
    fftw_free(buf);
    fftw_free(spec);
}

StepKernel::~StepKernel() = default;
StepKernel::StepKernel(StepKernel&&) noexcept = default;
StepKernel& StepKernel::operator=(StepKernel&&) noexcept = default;

double StepKernel::upward_mass_beyond(double dx) const {
    long double s = 0.0L;
    for (std::ptrdiff_t j = j_hi_; j >= j_lo_ && static_cast<double>(j) * grid_.h > dx; --j) {
        s += weights_[static_cast<std::size_t>(j - j_lo_)];
    }
    return static_cast<double>(s);
}

void StepKernel::apply(std::span<const double> v, const Extension& lower, const Extension& upper,
                       std::span<double> out) const {
    const std::size_t n = grid_.n;
    if (v.size() != n || out.size() != n) throw std::invalid_argument("StepKernel::apply: size mismatch");
    if (lower.kind == Extension::Kind::Function) {
        throw ContractError("lower extension must be affine");
    }
    if (!lower.defined()) {
        for (double p : below_p_) {
            if (p > 0.0) throw ContractError("mass leaves the lattice from below and no lower extension is set");
        }
    }
    if (!upper.defined()) {
        for (double p : above_p_) {
            if (p > 0.0) throw ContractError("mass leaves the lattice from above and no upper extension is set");
        }
    }
    const bool ghost = upper.kind == Extension::Kind::Function;
    const std::size_t reach = upward_reach();

    const std::size_t size = fft_->size;
    const std::size_t half = size / 2 + 1;
    double* buf = fftw_alloc_real(size);
    fftw_complex* spec = fftw_alloc_complex(half);
    std::copy(v.begin(), v.end(), buf);
    std::fill(buf + n, buf + size, 0.0);
    if (ghost) {
        for (std::size_t q = 0; q < reach; ++q) buf[n + q] = upper.fn(grid_.x(n + q));
    }
    fftw_execute_dft_r2c(fft_->forward, buf, spec);
    for (std::size_t k = 0; k < half; ++k) {
        const std::complex<double> z = std::complex<double>(spec[k][0], spec[k][1]) * fft_->kernel_hat[k];
        spec[k][0] = z.real();
        spec[k][1] = z.imag();
    }
    fftw_execute_dft_c2r(fft_->inverse, spec, buf);
    const double scale = 1.0 / static_cast<double>(size);
    const auto off = static_cast<std::size_t>(j_hi_);
    for (std::size_t i = 0; i < n; ++i) {
        const double ex = std::exp(grid_.x(i));
        double c = buf[i + off] * scale;
        if (lower.defined()) c += lower.a * below_p_[i] + lower.b * ex * below_e_[i];
        if (upper.kind == Extension::Kind::Affine) c += upper.a * above_p_[i] + upper.b * ex * above_e_[i];
        out[i] = discount_ * c;
    }
    fftw_free(buf);
    fftw_free(spec);
}

std::vector<double> StepKernel::apply(std::span<const double> v, const Extension& lower,
                                      const Extension& upper) const {
    std::vector<double> out(grid_.n);
    apply(v, lower, upper, out);
    return out;
}

std::vector<double> lattice_european_put(const DensityTable& table, const ModelParams& params,
                                         double strike, double ttm, const LogGrid& grid,
                                         std::size_t n_steps) {
    if (n_steps == 0) throw DomainError("n_steps must be positive");
    const double dt = ttm / static_cast<double>(n_steps);
    const StepKernel kernel(table, params, dt, grid);
    std::vector<double> v(grid.n), next(grid.n);
    for (std::size_t i = 0; i < grid.n; ++i) v[i] = payoff_put(std::exp(grid.x(i)), strike);
    for (std::size_t s = 0; s < n_steps; ++s) {
        const double remaining = dt * static_cast<double>(s);
        kernel.apply(v, Extension::affine(strike * std::exp(-params.rate * remaining), -1.0),
                     Extension::zero(), next);
        v.swap(next);
    }
    return v;
}

}  // namespace fmls
