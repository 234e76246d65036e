#include "fmls/density.hpp"

#include <algorithm>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <ostream>
#include <string>

#include "fmls/errors.hpp"
#include "fmls/simd/kernels.hpp"

namespace fmls {

namespace {

constexpr double kPi = std::numbers::pi;

// Points left of this use a saddle-point tilt; the rest share a small one.
constexpr double kLeftSplit = -1.0;
constexpr double kRightTilt = 0.02;
// Integrand truncated once it is exp(-kDecayLog) below its peak.
constexpr double kDecayLog = 45.0;
constexpr std::size_t kMaxNodes = 1u << 20;
// log f below this underflows; such points are exactly zero.
constexpr double kUnderflowLog = -760.0;
constexpr std::size_t kLeftBlock = 8;
// Tail-fit points must sit well above the absolute quadrature noise.
constexpr double kTailFitFloor = 1e-13;
constexpr std::size_t kRightChunk = 2048;

void check_alpha(double alpha) {
    if (!(alpha > 1.0 && alpha <= 2.0)) {
        throw DomainError("tail index must lie in (1, 2]");
    }
}

struct TiltPlan {
    double eta = 0.0;
    double dk = 0.0;
    std::size_t nodes = 0;
};

double saddle_tilt(double m, double alpha) {
    return std::pow(-m / alpha, 1.0 / (alpha - 1.0));
}

// Leading-order log density at the saddle for m < 0.
double saddle_log_density(double m, double alpha) {
    const double eta = saddle_tilt(m, alpha);
    return (1.0 - alpha) * std::pow(eta, alpha);
}

// Re (eta - i k)^alpha - eta^alpha; non-increasing in k >= 0.
double log_envelope(double eta, double k, double alpha) {
    const double r = std::hypot(eta, k);
    const double phi = std::atan2(k, eta);
    return std::pow(r, alpha) * std::cos(alpha * phi) - std::pow(eta, alpha);
}

double kmax_for(double eta, double alpha) {
    double hi = 1.0;
    while (log_envelope(eta, hi, alpha) > -kDecayLog) {
        hi *= 2.0;
        if (hi > 1e9) throw NumericalAccuracyError("characteristic function does not decay", hi);
    }
    double lo = 0.0;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (log_envelope(eta, mid, alpha) > -kDecayLog ? lo : hi) = mid;
    }
    return hi;
}

TiltPlan make_plan(double m_lo, double m_hi, double alpha, double period_scale) {
    TiltPlan plan;
    double period = 0.0;
    if (m_hi <= kLeftSplit) {
        plan.eta = saddle_tilt(0.5 * (m_lo + m_hi), alpha);
        period = std::max(100.0, (alpha - 1.0) * std::pow(plan.eta, alpha - 1.0) +
                                     kDecayLog / plan.eta + (m_hi - m_lo));
    } else {
        plan.eta = std::min(kRightTilt, 4.0 / std::max(m_hi, 1.0));
        period = kDecayLog / plan.eta + (m_hi - m_lo) + 100.0;
    }
    period *= period_scale;
    plan.dk = 2.0 * kPi / period;
    const double kmax = kmax_for(plan.eta, alpha);
    const double nodes = std::ceil(kmax / plan.dk) + 1.0;
    if (nodes > static_cast<double>(kMaxNodes)) {
        throw NumericalAccuracyError("density quadrature needs too many nodes; alpha too close to 1",
                                     nodes);
    }
    plan.nodes = static_cast<std::size_t>(nodes);
    return plan;
}

// Trapezoid coefficients of Re[exp(-ikm) Phi(k)] with Phi normalized by exp(eta^alpha).
void fill_coefficients(const TiltPlan& plan, double alpha, std::vector<double>& a,
                       std::vector<double>& b) {
    a.resize(plan.nodes);
    b.resize(plan.nodes);
    const double eta_pow = std::pow(plan.eta, alpha);
    for (std::size_t j = 0; j < plan.nodes; ++j) {
        const double k = plan.dk * static_cast<double>(j);
        const double w = j == 0 ? 0.5 * plan.dk : plan.dk;
        std::complex<double> phi;
        if (j == 0) {
            phi = 1.0;
        } else {
            const std::complex<double> z(plan.eta, -k);
            phi = std::exp(std::exp(alpha * std::log(z)) - eta_pow);
        }
        a[j] = w * phi.real();
        b[j] = w * phi.imag();
    }
}

double prefactor(const TiltPlan& plan, double m, double alpha) {
    return std::exp(plan.eta * m + std::pow(plan.eta, alpha)) / kPi;
}

double asymptotic_coefficient(int n, double alpha) {
    // c_n = 1 / (n! Gamma(-n alpha)) = -Gamma(1 + n alpha) sin(pi n alpha) / (pi n!)
    const double na = n * alpha;
    if (na == std::round(na)) return 0.0;
    return -std::exp(std::lgamma(1.0 + na) - std::lgamma(n + 1.0)) * std::sin(kPi * na) / kPi;
}

constexpr int kMaxSeriesTerms = 16;

// Sums term(c_n, n) until the terms stop shrinking.
template <class Term>
double asymptotic_sum(double alpha, Term&& term) {
    double sum = 0.0;
    double prev = std::numeric_limits<double>::infinity();
    for (int n = 1; n <= kMaxSeriesTerms; ++n) {
        const double c = asymptotic_coefficient(n, alpha);
        // sin(pi n alpha) = 0 gives exact zeros (alpha = 1.5, 2); skip them.
        if (c == 0.0) continue;
        const double t = term(c, n);
        if (std::abs(t) > prev) break;
        sum += t;
        if (std::abs(t) <= 1e-17 * std::abs(sum)) break;
        prev = std::abs(t);
    }
    return sum;
}

// Integral of the cubic through g(o), g(o+1), g(o+2), g(o+3) over [ua, ub],
// exact by two-point Gauss-Legendre.
double cubic_integral(const double* g4, double o, double ua, double ub) {
    const double half = 0.5 * (ub - ua);
    const double mid = 0.5 * (ua + ub);
    const double off = half / std::numbers::sqrt3;
    auto eval = [&](double u) {
        const double t = u - o;
        const double l0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
        const double l1 = t * (t - 2.0) * (t - 3.0) / 2.0;
        const double l2 = -t * (t - 1.0) * (t - 3.0) / 2.0;
        const double l3 = t * (t - 1.0) * (t - 2.0) / 6.0;
        return l0 * g4[0] + l1 * g4[1] + l2 * g4[2] + l3 * g4[3];
    };
    return half * (eval(mid - off) + eval(mid + off));
}

}  // namespace

std::complex<double> char_exponent(double k, double alpha) {
    check_alpha(alpha);
    if (k == 0.0) return {0.0, 0.0};
    const double mag = std::pow(std::abs(k), alpha);
    const double angle = alpha * kPi / 2.0;
    const double sgn = k > 0.0 ? 1.0 : -1.0;
    return {mag * std::cos(angle), sgn * mag * std::sin(angle)};
}

DensityValue density_with_error(double m, double alpha, double tol) {
    check_alpha(alpha);
    if (!(tol > 0.0)) throw DomainError("tol must be positive");
    if (m < kLeftSplit && saddle_log_density(m, alpha) < kUnderflowLog) {
        return {0.0, 0.0, 0};
    }
    std::vector<double> a, b, a2, b2;
    double estimate = std::numeric_limits<double>::infinity();
    std::size_t nodes = 0;
    for (double scale = 1.0; scale <= 64.0; scale *= 2.0) {
        TiltPlan plan;
        try {
            plan = make_plan(m, m, alpha, scale);
        } catch (const NumericalAccuracyError&) {
            break;
        }
        fill_coefficients(plan, alpha, a, b);
        a2.clear();
        b2.clear();
        for (std::size_t j = 0; j < a.size(); j += 2) {
            a2.push_back(2.0 * a[j]);
            b2.push_back(2.0 * b[j]);
        }
        const double mm[1] = {m};
        double fine = 0.0, coarse = 0.0;
        simd::trig_series(a, b, plan.dk, mm, std::span<double>(&fine, 1));
        simd::trig_series(a2, b2, 2.0 * plan.dk, mm, std::span<double>(&coarse, 1));
        const double pre = prefactor(plan, m, alpha);
        const double value = pre * fine;
        estimate = pre * std::abs(fine - coarse) + 64.0 * std::numeric_limits<double>::epsilon() * pre * std::abs(a[0]);
        nodes = plan.nodes;
        if (estimate <= tol) {
            if (value < -tol) {
                throw NumericalAccuracyError("negative density beyond tolerance", -value);
            }
            return {std::max(value, 0.0), estimate, nodes};
        }
    }
    throw NumericalAccuracyError("density quadrature did not reach tolerance at m = " + std::to_string(m),
                                 estimate);
}

double density(double m, double alpha, double tol) {
    return density_with_error(m, alpha, tol).value;
}

double density_asymptotic(double m, double alpha) {
    check_alpha(alpha);
    if (!(m > 0.0)) throw DomainError("asymptotic series needs m > 0");
    return asymptotic_sum(alpha, [&](double c, int n) { return c * std::pow(m, -n * alpha - 1.0); });
}

double tail_mass_asymptotic(double r, double alpha) {
    check_alpha(alpha);
    if (!(r > 0.0)) throw DomainError("asymptotic tail needs r > 0");
    return asymptotic_sum(alpha, [&](double c, int n) { return c * std::pow(r, -n * alpha) / (n * alpha); });
}

double exp_weighted_tail_asymptotic(double r, double theta, double alpha) {
    if (theta == 0.0) return tail_mass_asymptotic(r, alpha);
    check_alpha(alpha);
    if (alpha == 2.0) return 0.0;
    boost::math::quadrature::exp_sinh<double> integrator;
    auto g = [&](double u) {
        // u in (0, inf) maps to m = r + u
        const double m = r + u;
        return std::exp(-theta * m) * density_asymptotic(m, alpha);
    };
    return integrator.integrate(g, 1e-14);
}

// ---------------------------------------------------------------------------
// DensityTable

DensityTable DensityTable::build(double alpha, const DensityGridSpec& grid) {
    check_alpha(alpha);
    if (!(grid.spacing > 0.0) || !(grid.right > grid.left) || !(grid.right > 10.0)) {
        throw ConfigError("density grid must satisfy left < right, right > 10, spacing > 0");
    }
    DensityTable t;
    t.alpha_ = alpha;
    t.left_ = grid.left;
    t.spacing_ = grid.spacing;
    const auto n = static_cast<std::size_t>(std::llround((grid.right - grid.left) / grid.spacing)) + 1;
    if (n < 8) throw ConfigError("density grid too coarse");
    t.values_.assign(n, 0.0);

    std::vector<double> a, b, ms, out;

    // Right region: one shared tilt and coefficient set.
    std::size_t first_right = 0;
    while (first_right < n && t.node(first_right) < kLeftSplit) ++first_right;
    if (first_right < n) {
        const TiltPlan plan = make_plan(t.node(first_right), t.node(n - 1), alpha, 1.0);
        fill_coefficients(plan, alpha, a, b);
        for (std::size_t k0 = first_right; k0 < n; k0 += kRightChunk) {
            const std::size_t k1 = std::min(n, k0 + kRightChunk);
            ms.resize(k1 - k0);
            out.resize(k1 - k0);
            for (std::size_t k = k0; k < k1; ++k) ms[k - k0] = t.node(k);
            simd::trig_series(a, b, plan.dk, ms, out);
            for (std::size_t k = k0; k < k1; ++k) {
                t.values_[k] = prefactor(plan, ms[k - k0], alpha) * out[k - k0];
            }
        }
    }

    // Left region: blocks with a saddle-point tilt each.
    for (std::size_t k1 = first_right; k1 > 0;) {
        const std::size_t k0 = k1 >= kLeftBlock ? k1 - kLeftBlock : 0;
        if (saddle_log_density(t.node(k1 - 1), alpha) < kUnderflowLog) break;
        const TiltPlan plan = make_plan(t.node(k0), t.node(k1 - 1), alpha, 1.0);
        fill_coefficients(plan, alpha, a, b);
        ms.resize(k1 - k0);
        out.resize(k1 - k0);
        for (std::size_t k = k0; k < k1; ++k) ms[k - k0] = t.node(k);
        simd::trig_series(a, b, plan.dk, ms, out);
        for (std::size_t k = k0; k < k1; ++k) {
            t.values_[k] = prefactor(plan, ms[k - k0], alpha) * out[k - k0];
        }
        k1 = k0;
    }

    double worst_negative = 0.0;
    for (double& v : t.values_) {
        if (!std::isfinite(v)) throw NumericalAccuracyError("non-finite density value", v);
        worst_negative = std::min(worst_negative, v);
        v = std::max(v, 0.0);
    }
    if (worst_negative < -1e-12) {
        throw NumericalAccuracyError("negative density noise above tolerance", -worst_negative);
    }

    // Cumulative integrals from each node to the right cut; fourth-order
    // cell rule, one-sided in the last cell, f = 0 left of the first node.
    const double h = t.spacing_;
    const auto& f = t.values_;
    t.cumulative_.assign(n, 0.0);
    for (std::size_t k = n - 1; k-- > 0;) {
        double cell = 0.0;
        if (k + 2 >= n) {
            cell = h * (f[k - 2] - 5.0 * f[k - 1] + 19.0 * f[k] + 9.0 * f[k + 1]) / 24.0;
        } else {
            const double before = k == 0 ? 0.0 : f[k - 1];
            cell = h * (-before + 13.0 * f[k] + 13.0 * f[k + 1] - f[k + 2]) / 24.0;
        }
        t.cumulative_[k] = t.cumulative_[k + 1] + cell;
    }
    t.tail_mass_ = tail_mass_asymptotic(t.right_cut(), alpha);

    // Right-tail exponent: least squares of log f on log m over [R/4, R].
    {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int cnt = 0;
        const double lo = t.right_cut() / 4.0;
        const std::size_t stride = std::max<std::size_t>(1, static_cast<std::size_t>(1.0 / h));
        for (std::size_t k = n - 1; k < n && t.node(k) >= lo; k = k >= stride ? k - stride : n) {
            if (f[k] <= kTailFitFloor) continue;
            const double x = std::log(t.node(k));
            const double y = std::log(f[k]);
            sx += x; sy += y; sxx += x * x; sxy += x * y;
            ++cnt;
        }
        if (cnt >= 8) {
            t.tail_exponent_ = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
        } else {
            t.tail_exponent_ = -std::numeric_limits<double>::infinity();
        }
    }

    const double norm_err = t.normalization_error();
    if (!(norm_err <= 1e-6)) {
        throw NumericalAccuracyError("density table normalization outside 1e-6", norm_err);
    }
    return t;
}

DensityTable build_table(double alpha, const DensityGridSpec& grid) {
    return DensityTable::build(alpha, grid);
}

const DensityTable& shared_table(double alpha) {
    static std::mutex mu;
    static std::map<double, std::unique_ptr<DensityTable>> cache;
    std::lock_guard lock(mu);
    auto& slot = cache[alpha];
    if (!slot) slot = std::make_unique<DensityTable>(DensityTable::build(alpha));
    return *slot;
}

std::vector<double> DensityTable::abscissae() const {
    std::vector<double> m(values_.size());
    for (std::size_t k = 0; k < m.size(); ++k) m[k] = node(k);
    return m;
}

double DensityTable::operator()(double m) const {
    const double r = right_cut();
    if (m > r) return alpha_ == 2.0 ? 0.0 : density_asymptotic(m, alpha_);
    if (m < left_) return 0.0;
    const std::size_t n = values_.size();
    const double u = (m - left_) / spacing_;
    const auto k = static_cast<std::ptrdiff_t>(std::floor(u));
    // Six-point Lagrange window around [k, k+1], clamped to the table.
    std::ptrdiff_t s = std::clamp<std::ptrdiff_t>(k - 2, 0, static_cast<std::ptrdiff_t>(n) - 6);
    double sum = 0.0;
    for (int i = 0; i < 6; ++i) {
        double li = 1.0;
        for (int j = 0; j < 6; ++j) {
            if (j != i) li *= (u - static_cast<double>(s + j)) / static_cast<double>(i - j);
        }
        sum += li * values_[static_cast<std::size_t>(s + i)];
    }
    return std::max(sum, 0.0);
}

template <class G>
double DensityTable::partial_cell(std::size_t k, double d, G&& g) const {
    const std::size_t n = values_.size();
    const std::size_t s = std::min(k == 0 ? 0 : k - 1, n - 4);
    const double g4[4] = {g(s), g(s + 1), g(s + 2), g(s + 3)};
    const double ua = (d - left_) / spacing_;
    return spacing_ * cubic_integral(g4, static_cast<double>(s), ua, static_cast<double>(k + 1));
}

double DensityTable::tail_integral(double d) const {
    const double r = right_cut();
    if (d >= r) {
        return alpha_ == 2.0 ? 0.0 : tail_mass_asymptotic(d, alpha_);
    }
    if (d <= left_) return std::clamp(cumulative_[0] + tail_mass_, 0.0, 1.0);
    const auto k = static_cast<std::size_t>((d - left_) / spacing_);
    if (k + 1 >= values_.size()) return tail_mass_;
    const double part = partial_cell(k, d, [this](std::size_t i) { return values_[i]; });
    return std::clamp(part + cumulative_[k + 1] + tail_mass_, 0.0, 1.0);
}

double DensityTable::extrapolated_mass(double d) const {
    const double r = right_cut();
    if (alpha_ == 2.0) return 0.0;
    return d >= r ? tail_mass_asymptotic(d, alpha_) : tail_mass_;
}

double DensityTable::left_tail_margin(double theta) const {
    const double norm = std::exp(std::pow(theta, alpha_));
    double worst = 0.0;
    const std::size_t count = std::min(values_.size(), static_cast<std::size_t>(5.0 / spacing_));
    for (std::size_t k = 0; k < count; ++k) {
        worst = std::max(worst, std::exp(-theta * node(k)) * values_[k] / norm);
    }
    return worst;
}

double DensityTable::exp_weighted_integral(double d, double theta) const {
    if (!(theta >= 0.0)) throw DomainError("theta must be non-negative");
    if (theta == 0.0) return tail_integral(d);
    const double r = right_cut();
    if (d >= r) return exp_weighted_tail_asymptotic(d, theta, alpha_);
    if (d < left_) {
        const double margin = left_tail_margin(theta);
        if (margin > 1e-14) {
            throw NumericalAccuracyError("exponential weight too large for the left window", margin);
        }
        d = left_;
    }
    const std::size_t n = values_.size();
    const double h = spacing_;
    auto g = [&](std::size_t i) { return std::exp(-theta * node(i)) * values_[i]; };

    const auto k = std::min(static_cast<std::size_t>((d - left_) / h), n - 2);
    double total = partial_cell(k, d, g);
    const std::size_t a = k + 1;  // full cells [a, n-1]
    if (a + 4 <= n) {
        // Trapezoid + fourth-order end corrections (one-sided at the right cut).
        const double scale = std::exp(-theta * node(a));
        const double sum = scale * simd::geometric_dot(std::span<const double>(values_).subspan(a),
                                                       std::exp(-theta * h));
        const double trap = sum - 0.5 * (g(a) + g(n - 1));
        const double corr = -g(a - 1) + g(a + 1) + g(n - 4) - 4.0 * g(n - 3) + 7.0 * g(n - 2) -
                            4.0 * g(n - 1);
        total += h * (trap + corr / 24.0);
    } else {
        for (std::size_t c = a; c + 1 < n; ++c) total += partial_cell(c, node(c), g);
    }
    return total + exp_weighted_tail_asymptotic(r, theta, alpha_);
}

double DensityTable::exp_moment(double theta) const {
    return exp_weighted_integral(-std::numeric_limits<double>::infinity(), theta);
}

double DensityTable::normalization_error() const {
    return std::abs(cumulative_[0] + tail_mass_ - 1.0);
}

void DensityTable::write_csv(std::ostream& os) const {
    os << "m,f\n";
    os.precision(17);
    for (std::size_t k = 0; k < values_.size(); ++k) os << node(k) << ',' << values_[k] << '\n';
}

}  // namespace fmls
