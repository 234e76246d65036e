#include "fmls/exercise.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "fmls/errors.hpp"

namespace fmls {

namespace {

double default_window(const ModelParams& params, const OptionSpec& spec) {
    const double nu = convexity_adjustment(params.alpha, params.sigma);
    return 8.0 * std::pow(nu * spec.expiry, 1.0 / params.alpha) + 0.5;
}

void check_level(int level, const EngineGrid& grid) {
    if (grid.finest_level < 0 || grid.finest_level > kMaxLevel) {
        throw ConfigError("finest_level must lie in [0, " + std::to_string(kMaxLevel) + "]");
    }
    if (level < 0 || level > grid.finest_level) {
        throw ConfigError("refinement level " + std::to_string(level) + " outside [0, finest_level = " +
                          std::to_string(grid.finest_level) + "]");
    }
}

std::size_t strike_index(const LogGrid& g) { return g.n / 2; }

// The far-field extension V = 0 above the lattice biases the top nodes; the
// bias travels down only with the light upward tail.
std::size_t trusted_top(const LogGrid& g, const ModelParams& params, const OptionSpec& spec) {
    const double nu = convexity_adjustment(params.alpha, params.sigma);
    const double margin = 6.0 * std::pow(nu * spec.expiry, 1.0 / params.alpha);
    const double x_hi = g.x_max() - margin;
    std::size_t k = strike_index(g);
    while (k + 1 < g.n && g.x(k + 1) <= x_hi) ++k;
    return k;
}

double leakage_of(const StepKernel& k, const LogGrid& g) {
    return k.upward_mass_beyond(g.x_max() - g.x(strike_index(g)));
}

void check_leakage(const StepKernel& k, const LogGrid& g, const EngineGrid& grid) {
    const double leak = leakage_of(k, g);
    if (leak <= grid.max_leakage) return;
    double need = g.x_max() - g.x(strike_index(g));
    while (k.upward_mass_beyond(need) > grid.max_leakage) need += g.h;
    throw ConfigError("grid window too small: upward transition mass " + std::to_string(leak) +
                      " per step exceeds " + std::to_string(grid.max_leakage) +
                      "; required window >= " + std::to_string(need + g.h));
}

struct Induction {
    std::vector<double> v0;
    std::optional<ValueSurface> surface;
    double leakage = 0.0;
};

Induction induct(int level, const ModelParams& params, const OptionSpec& spec, const EngineGrid& grid,
                 const LogGrid& g, bool keep_surface) {
    const std::size_t steps = std::size_t{1} << level;
    const double dt = spec.expiry / static_cast<double>(steps);
    const StepKernel kernel(shared_table(params.alpha), params, dt, g);
    check_leakage(kernel, g, grid);

    std::size_t stride = 1;
    while (steps / stride + 1 > std::max<std::size_t>(grid.max_stored_slices, 2)) stride <<= 1;

    const double strike = spec.strike;
    const double margin = kExerciseMargin * strike;
    std::vector<double> payoff(g.n), v(g.n), c(g.n);
    for (std::size_t i = 0; i < g.n; ++i) payoff[i] = payoff_put(std::exp(g.x(i)), strike);
    v = payoff;

    Induction out;
    out.leakage = leakage_of(kernel, g);
    ValueSurface s;
    if (keep_surface) {
        s.grid = g;
        s.level = level;
        s.alpha = params.alpha;
        s.strike = strike;
        s.expiry = spec.expiry;
        s.leakage = out.leakage;
        s.trusted_hi = trusted_top(g, params, spec);
        s.t.push_back(spec.expiry);
        s.values.push_back(v);
        s.continuation.push_back(v);
        std::vector<std::uint8_t> flags(g.n);
        for (std::size_t i = 0; i < g.n; ++i) flags[i] = payoff[i] > 0.0;
        s.exercise.push_back(std::move(flags));
    }
    // Below the lattice: exercise region. Above it: far field, V = 0.
    const Extension lower = Extension::affine(strike, -1.0);
    const Extension upper = Extension::zero();
    for (std::size_t step = steps; step-- > 0;) {
        kernel.apply(v, lower, upper, c);
        std::vector<std::uint8_t> flags(keep_surface ? g.n : 0);
        for (std::size_t i = 0; i < g.n; ++i) {
            v[i] = std::max(payoff[i], c[i]);
            if (keep_surface) flags[i] = payoff[i] > 0.0 && payoff[i] - c[i] > margin;
        }
        if (keep_surface && step % stride == 0) {
            s.t.push_back(dt * static_cast<double>(step));
            s.values.push_back(v);
            s.continuation.push_back(c);
            s.exercise.push_back(std::move(flags));
        }
    }
    out.v0 = v;
    if (keep_surface) {
        std::reverse(s.t.begin(), s.t.end());
        std::reverse(s.values.begin(), s.values.end());
        std::reverse(s.continuation.begin(), s.continuation.end());
        std::reverse(s.exercise.begin(), s.exercise.end());
        out.surface = std::move(s);
    }
    return out;
}

double interp_cubic(const LogGrid& g, const std::vector<double>& v, double x) {
    const double u = (x - g.x0) / g.h;
    if (u < -1e-9 || u > static_cast<double>(g.n - 1) + 1e-9) {
        throw DomainError("log-price outside the lattice");
    }
    const auto k = static_cast<std::ptrdiff_t>(std::floor(u));
    const std::ptrdiff_t s = std::clamp<std::ptrdiff_t>(k - 1, 0, static_cast<std::ptrdiff_t>(g.n) - 4);
    double sum = 0.0;
    for (int i = 0; i < 4; ++i) {
        double li = 1.0;
        for (int j = 0; j < 4; ++j) {
            if (j != i) li *= (u - static_cast<double>(s + j)) / static_cast<double>(i - j);
        }
        sum += li * v[static_cast<std::size_t>(s + i)];
    }
    return sum;
}

double value_at_spot(const LogGrid& g, const std::vector<double>& v, double spot) {
    if (!(spot > 0.0)) throw DomainError("spot must be positive");
    return interp_cubic(g, v, std::log(spot));
}

}  // namespace

double ValueSurface::value_at(double spot, std::size_t k) const {
    if (k >= values.size()) throw DomainError("slice index out of range");
    return value_at_spot(grid, values[k], spot);
}

void ValueSurface::write_csv(std::ostream& os, double s_lo, double s_hi) const {
    os << "t,x,S,V,exercise_flag\n";
    os.precision(12);
    for (std::size_t k = 0; k < t.size(); ++k) {
        for (std::size_t i = 0; i < grid.n; ++i) {
            const double x = grid.x(i);
            const double s = std::exp(x);
            if (s < s_lo || s > s_hi) continue;
            os << t[k] << ',' << x << ',' << s << ',' << values[k][i] << ',' << int(exercise[k][i]) << '\n';
        }
    }
}

LogGrid engine_lattice(const ModelParams& params, const OptionSpec& spec, const EngineGrid& grid) {
    params.validate();
    spec.validate();
    check_level(0, grid);
    if (!(grid.h_max > 0.0)) throw ConfigError("h_max must be positive");
    if (grid.window < 0.0) throw ConfigError("window must be non-negative");
    const double w = grid.window > 0.0 ? grid.window : default_window(params, spec);
    const double finest_dt = spec.expiry / static_cast<double>(std::size_t{1} << grid.finest_level);
    const double h = std::min(grid.h_max, 0.95 * max_lattice_spacing(params, finest_dt));
    const auto half = static_cast<std::size_t>(std::ceil(w / h));
    if (half < 2) throw ConfigError("window narrower than two lattice cells");
    return LogGrid{std::log(spec.strike) - static_cast<double>(half) * h, h, 2 * half + 1};
}

ValueSurface bermudan_surface(int level, const ModelParams& params, const OptionSpec& spec,
                              const EngineGrid& grid) {
    check_level(level, grid);
    const LogGrid g = engine_lattice(params, spec, grid);
    return std::move(*induct(level, params, spec, grid, g, true).surface);
}

std::vector<ConvergenceRow> bermudan_levels(int lo, int hi, const ModelParams& params,
                                            const OptionSpec& spec, const EngineGrid& grid,
                                            double spot) {
    if (lo > hi) throw ConfigError("level range must be ascending");
    check_level(lo, grid);
    check_level(hi, grid);
    const LogGrid g = engine_lattice(params, spec, grid);
    const double s0 = spot > 0.0 ? spot : spec.strike;
    const std::size_t top = trusted_top(g, params, spec);
    std::vector<ConvergenceRow> rows;
    std::vector<double> prev;
    for (int level = lo; level <= hi; ++level) {
        const auto run = induct(level, params, spec, grid, g, false);
        ConvergenceRow row;
        row.level = level;
        row.value = value_at_spot(g, run.v0, s0);
        if (!prev.empty()) {
            row.increment = row.value - rows.back().value;
            row.max_increment = -1e300;
            row.min_increment = 1e300;
            for (std::size_t i = 0; i <= top; ++i) {
                const double d = run.v0[i] - prev[i];
                row.max_increment = std::max(row.max_increment, d);
                row.min_increment = std::min(row.min_increment, d);
            }
        }
        rows.push_back(row);
        prev = run.v0;
    }
    return rows;
}

AmericanResult american_price(double tol, const ModelParams& params, const OptionSpec& spec,
                              const EngineGrid& grid, double spot) {
    if (!(tol > 0.0)) throw DomainError("tol must be positive");
    const LogGrid g = engine_lattice(params, spec, grid);
    const double s0 = spot > 0.0 ? spot : spec.strike;
    const std::size_t top = trusted_top(g, params, spec);
    AmericanResult result;
    std::vector<double> prev;
    double last = 0.0;
    for (int level = 0; level <= grid.finest_level; ++level) {
        auto run = induct(level, params, spec, grid, g, true);
        ConvergenceRow row;
        row.level = level;
        row.value = value_at_spot(g, run.v0, s0);
        double worst = 0.0;
        if (!prev.empty()) {
            row.increment = row.value - result.history.back().value;
            row.max_increment = -1e300;
            row.min_increment = 1e300;
            for (std::size_t i = 0; i <= top; ++i) {
                const double d = run.v0[i] - prev[i];
                row.max_increment = std::max(row.max_increment, d);
                row.min_increment = std::min(row.min_increment, d);
                worst = std::max(worst, std::abs(d));
            }
        }
        result.history.push_back(row);
        result.surface = std::move(*run.surface);
        result.level_used = level;
        if (!prev.empty()) {
            last = worst;
            if (worst < tol * spec.strike) return result;
        }
        prev = std::move(run.v0);
    }
    throw ConvergenceError("Bermudan refinement reached level " + std::to_string(grid.finest_level) +
                               " without meeting the tolerance",
                           last);
}

std::vector<ExerciseBoundary> extract_boundary(const ValueSurface& surface) {
    const LogGrid& g = surface.grid;
    const double h = g.h;
    std::vector<ExerciseBoundary> out;
    for (std::size_t k = 0; k + 1 < surface.slices(); ++k) {
        ExerciseBoundary b;
        b.t = surface.t[k];
        const auto& flags = surface.exercise[k];
        const auto& v = surface.values[k];
        const auto& c = surface.continuation[k];
        std::size_t last = g.n;
        for (std::size_t i = g.n; i-- > 0;) {
            if (flags[i]) {
                last = i;
                break;
            }
        }
        if (last == g.n || last + 4 >= g.n || last < 1) {
            out.push_back(b);
            continue;
        }
        auto payoff = [&](double x) { return surface.strike - std::exp(x); };
        const double dk = c[last] - payoff(g.x(last));
        const double dk1 = c[last + 1] - payoff(g.x(last + 1));
        double w = 1.0;
        if (dk1 > 0.0) w = std::clamp(dk / (dk - dk1), 0.0, 1.0);
        b.present = true;
        b.x_star = g.x(last) + w * h;

        // Quadratic through the three continuation-side nodes, differentiated at x_star.
        const double s = (b.x_star - g.x(last + 1)) / h;
        const double v0 = v[last + 1], v1 = v[last + 2], v2 = v[last + 3];
        const double dv = ((v1 - v0) + (s - 0.5) * (v2 - 2.0 * v1 + v0)) / h;
        b.pasting_gap = std::abs(dv + std::exp(b.x_star));

        // Linear interpolation of V across the cell holding x_star. V has a
        // derivative jump of pasting_gap there (zero in the smooth-pasting
        // limit) and curvature bounded by the continuation side and e^x.
        const double v_star = (1.0 - w) * v[last] + w * v[last + 1];
        b.value_matching_error = std::abs(v_star - payoff(b.x_star));
        const double curvature = std::max(std::abs(v2 - 2.0 * v1 + v0) / (h * h), std::exp(g.x(last + 1)));
        b.interpolation_tolerance = h / 4.0 * b.pasting_gap + h * h / 2.0 * curvature +
                                    kExerciseMargin * surface.strike;
        out.push_back(b);
    }
    return out;
}

SmoothPastingReport smooth_pasting_report(const ValueSurface& surface,
                                          const std::vector<ExerciseBoundary>& boundaries) {
    SmoothPastingReport r;
    std::vector<double> gaps;
    for (const auto& b : boundaries) {
        if (!b.present) continue;
        PastingRow row{b.t, std::exp(b.x_star), b.value_matching_error, b.interpolation_tolerance,
                       b.pasting_gap};
        r.rows.push_back(row);
        gaps.push_back(b.pasting_gap);
        r.max_gap = std::max(r.max_gap, b.pasting_gap);
        r.max_value_matching_error = std::max(r.max_value_matching_error, b.value_matching_error);
        if (b.value_matching_error > b.interpolation_tolerance) r.value_matching_ok = false;
        if (!(std::exp(b.x_star) < surface.strike)) r.strictly_in_the_money = false;
    }
    if (!gaps.empty()) {
        std::sort(gaps.begin(), gaps.end());
        const std::size_t m = gaps.size() / 2;
        r.median_gap = gaps.size() % 2 ? gaps[m] : 0.5 * (gaps[m - 1] + gaps[m]);
    }
    return r;
}

void write_boundary_csv(std::ostream& os, const std::vector<ExerciseBoundary>& boundaries) {
    os << "t,S_star,pasting_gap\n";
    os.precision(12);
    for (const auto& b : boundaries) {
        if (b.present) os << b.t << ',' << std::exp(b.x_star) << ',' << b.pasting_gap << '\n';
    }
}

SurfaceAudit audit_surface(const ValueSurface& s) {
    SurfaceAudit a;
    const LogGrid& g = s.grid;
    std::vector<double> payoff(g.n);
    for (std::size_t i = 0; i < g.n; ++i) payoff[i] = payoff_put(std::exp(g.x(i)), s.strike);
    for (std::size_t k = 0; k < s.slices(); ++k) {
        const auto& v = s.values[k];
        for (std::size_t i = 0; i <= s.trusted_hi; ++i) {
            a.payoff_shortfall = std::max(a.payoff_shortfall, payoff[i] - v[i]);
            if (k + 1 == s.slices()) {
                a.terminal_error = std::max(a.terminal_error, std::abs(v[i] - payoff[i]));
            } else {
                a.obstacle_error =
                    std::max(a.obstacle_error, std::abs(v[i] - std::max(payoff[i], s.continuation[k][i])));
            }
            if (i + 1 <= s.trusted_hi) a.monotone_violation = std::max(a.monotone_violation, v[i + 1] - v[i]);
            if (k + 1 < s.slices()) a.time_violation = std::max(a.time_violation, s.values[k + 1][i] - v[i]);
        }
    }
    return a;
}

}  // namespace fmls
