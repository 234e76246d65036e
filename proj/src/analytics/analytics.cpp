#include "fmls/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <future>
#include <limits>
#include <ostream>
#include <sstream>

#include "fmls/errors.hpp"
#include "fmls/european.hpp"
#include "fmls/fractional.hpp"
#include "fmls/simd/kernels.hpp"

#ifndef FMLS_VERSION
#define FMLS_VERSION "0.0.0"
#endif

namespace fmls {

using nlohmann::json;

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

std::string pricer_label(PricerKind k) { return k == PricerKind::European ? "european" : "american"; }

// Runs f over the items concurrently and returns results in input order.
template <class T, class F>
auto parallel_map(std::span<const T> items, F f) {
    using R = decltype(f(items[0]));
    std::vector<std::future<R>> futures;
    futures.reserve(items.size());
    for (const T& item : items) futures.push_back(std::async(std::launch::async, f, item));
    std::vector<R> out;
    out.reserve(items.size());
    for (auto& fu : futures) out.push_back(fu.get());
    return out;
}

AmericanResult american_for(const RunConfig& config, double alpha) {
    return american_price(config.grid.american_tol, config.params(alpha), config.spec(), config.grid.engine,
                          config.option.spots.front());
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
}

}  // namespace

std::string version_string() { return std::string("fmls ") + FMLS_VERSION; }

json PropertyReport::to_json() const {
    return json{{"check", check},
                {"passed", passed},
                {"worst_value", worst_value},
                {"worst_location", worst_location},
                {"tolerance", tolerance},
                {"provenance", provenance},
                {"details", details}};
}

void Table::write_csv(std::ostream& os) const {
    for (std::size_t c = 0; c < columns.size(); ++c) os << (c ? "," : "") << columns[c];
    os << '\n';
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) os << ',';
            const json& cell = row[c];
            if (cell.is_string()) {
                os << cell.get<std::string>();
            } else if (cell.is_number_float()) {
                const double v = cell.get<double>();
                if (std::isfinite(v)) {
                    std::ostringstream s;
                    s.precision(12);
                    s << v;
                    os << s.str();
                }
            } else if (!cell.is_null()) {
                os << cell.dump();
            }
        }
        os << '\n';
    }
}

json Table::to_json() const {
    json arr = json::array();
    for (const auto& row : rows) {
        json obj = json::object();
        for (std::size_t c = 0; c < columns.size() && c < row.size(); ++c) {
            const json& cell = row[c];
            obj[columns[c]] = cell.is_number_float() && !std::isfinite(cell.get<double>()) ? json() : cell;
        }
        arr.push_back(std::move(obj));
    }
    return json{{"name", name}, {"columns", columns}, {"rows", arr}};
}

bool JobResult::passed() const {
    return std::all_of(reports.begin(), reports.end(), [](const PropertyReport& r) { return r.passed; });
}

// ---------------------------------------------------------------------------

PropertyReport scan_convexity(PricerKind kind, double alpha, std::span<const double> s_grid,
                              std::span<const double> t_list, const RunConfig& config, Table* rows) {
    if (s_grid.size() < 16) throw ConfigError("convexity scan needs at least 16 S points");
    const double k = config.option.strike;
    if (!(s_grid.front() <= 0.5 * k && s_grid.back() >= 1.5 * k)) {
        throw ConfigError("convexity scan must span [0.5 K, 1.5 K]");
    }
    const ModelParams p = config.params(alpha);
    const OptionSpec spec = config.spec();
    PropertyReport r;
    r.check = "convexity_" + pricer_label(kind) + "_alpha_" + fmt(alpha);
    r.tolerance = -config.tolerances.convexity * k;
    r.provenance = "closed-form";
    r.worst_value = std::numeric_limits<double>::infinity();

    auto record = [&](double t, double worst, double at) {
        if (rows) rows->rows.push_back({pricer_label(kind), alpha, t, worst, at});
        if (worst < r.worst_value) {
            r.worst_value = worst;
            r.worst_location = "t=" + fmt(t) + " S=" + fmt(at);
        }
    };

    if (kind == PricerKind::European) {
        const DensityTable& table = shared_table(alpha);
        for (double t : t_list) {
            std::vector<double> v(s_grid.size());
            for (std::size_t i = 0; i < s_grid.size(); ++i) {
                try {
                    v[i] = price_put(s_grid[i], t, p, spec, table);
                } catch (const std::exception& e) {
                    throw NumericalAccuracyError("pricing failed at S=" + fmt(s_grid[i]) + " t=" + fmt(t) + ": " +
                                                     e.what(),
                                                 std::numeric_limits<double>::quiet_NaN());
                }
            }
            double worst = std::numeric_limits<double>::infinity();
            double at = 0.0;
            for (std::size_t i = 1; i + 1 < v.size(); ++i) {
                const double d2 = v[i + 1] - 2.0 * v[i] + v[i - 1];
                if (d2 < worst) {
                    worst = d2;
                    at = s_grid[i];
                }
            }
            record(t, worst, at);
        }
        r.details["slices"] = t_list.size();
    } else {
        r.provenance = "lattice";
        const auto am = american_price(config.grid.american_tol, p, spec, config.grid.engine,
                                       config.option.spots.front());
        const ValueSurface& s = am.surface;
        const LogGrid& g = s.grid;
        const double lo = s_grid.front(), hi = s_grid.back();
        std::size_t i0 = 0;
        while (i0 < g.n && std::exp(g.x(i0)) < lo) ++i0;
        std::size_t i1 = i0;
        while (i1 + 1 < g.n && std::exp(g.x(i1 + 1)) <= hi) ++i1;
        const double dS = (hi - lo) / static_cast<double>(s_grid.size() - 1);
        for (std::size_t kk = 0; kk < s.slices(); ++kk) {
            const auto& v = s.values[kk];
            double worst = std::numeric_limits<double>::infinity();
            double at = 0.0;
            for (std::size_t i = i0 + 1; i < i1; ++i) {
                const double sm = std::exp(g.x(i - 1)), s0 = std::exp(g.x(i)), sp = std::exp(g.x(i + 1));
                const double slope_r = (v[i + 1] - v[i]) / (sp - s0);
                const double slope_l = (v[i] - v[i - 1]) / (s0 - sm);
                // second difference an S-grid of spacing dS would see
                const double d2 = (slope_r - slope_l) / (0.5 * (sp - sm)) * dS * dS;
                if (d2 < worst) {
                    worst = d2;
                    at = s0;
                }
            }
            if (kk % std::max<std::size_t>(1, s.slices() / 16) == 0 || kk + 1 == s.slices()) {
                if (rows) rows->rows.push_back({pricer_label(kind), alpha, s.t[kk], worst, at});
            }
            if (worst < r.worst_value) {
                r.worst_value = worst;
                r.worst_location = "t=" + fmt(s.t[kk]) + " S=" + fmt(at);
            }
        }
        r.details["slices"] = s.slices();
        r.details["level"] = am.level_used;
        r.details["spacing"] = dS;
    }
    r.passed = r.worst_value >= r.tolerance;
    return r;
}

PropertyReport scan_alpha(std::span<const double> alphas, PricerKind kind, std::span<const double> spots,
                          const RunConfig& config, Table* rows) {
    if (alphas.empty() || !std::is_sorted(alphas.begin(), alphas.end())) {
        throw ConfigError("alphas must be sorted ascending");
    }
    const double k = config.option.strike;
    const OptionSpec spec = config.spec();
    for (double a : alphas) (void)config.params(a);

    auto prices_for = [&](double alpha) {
        const ModelParams p = config.params(alpha);
        std::vector<double> out;
        if (kind == PricerKind::European) {
            for (double s : spots) out.push_back(price_put(s, 0.0, p, spec));
        } else {
            const auto am = american_for(config, alpha);
            for (double s : spots) out.push_back(am.surface.value_at(s));
        }
        return out;
    };
    const auto prices = parallel_map(alphas, prices_for);

    PropertyReport r;
    r.check = "alpha_monotonicity_" + pricer_label(kind);
    r.tolerance = config.tolerances.alpha_monotone * k;
    r.provenance = kind == PricerKind::European ? "closed-form" : "lattice";
    double worst_rise = -std::numeric_limits<double>::infinity();
    bool mono = true;
    for (std::size_t j = 0; j < spots.size(); ++j) {
        if (spots[j] < k) continue;
        for (std::size_t i = 1; i < alphas.size(); ++i) {
            const double rise = prices[i][j] - prices[i - 1][j];
            if (rise > worst_rise) {
                worst_rise = rise;
                r.worst_location = "S=" + fmt(spots[j]) + " alpha " + fmt(alphas[i - 1]) + "->" + fmt(alphas[i]);
            }
            if (rise > r.tolerance) mono = false;
        }
    }
    r.worst_value = std::isfinite(worst_rise) ? worst_rise : 0.0;
    bool endpoint_ok = true;
    json endpoint = json::array();
    const double sigma_bs = config.model.sigma_bs;
    const double r_ = config.model.rate;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        const ModelParams p = config.params(alphas[i]);
        for (std::size_t j = 0; j < spots.size(); ++j) {
            double ref = std::numeric_limits<double>::quiet_NaN();
            if (alphas[i] == 2.0) {
                if (kind == PricerKind::European) {
                    ref = bs_put_reference(spots[j], k, r_, sigma_bs, spec.expiry);
                    const double err = std::abs(prices[i][j] - ref);
                    if (err > config.tolerances.bs_endpoint * k) endpoint_ok = false;
                    endpoint.push_back({{"S", spots[j]}, {"price", prices[i][j]}, {"reference", ref}, {"abs_error", err}});
                } else {
                    ref = binomial_american_put(spots[j], k, r_, sigma_bs, spec.expiry, config.scan.binomial_steps);
                    const double err = std::abs(prices[i][j] - ref) / ref;
                    if (err > config.tolerances.binomial_rel) endpoint_ok = false;
                    endpoint.push_back({{"S", spots[j]}, {"price", prices[i][j]}, {"reference", ref}, {"rel_error", err}});
                }
            }
            if (rows) rows->rows.push_back({pricer_label(kind), alphas[i], p.sigma, spots[j], prices[i][j], ref});
        }
    }
    r.details["monotone"] = mono;
    r.details["endpoint_ok"] = endpoint_ok;
    r.details["endpoint"] = endpoint;
    r.details["endpoint_reference"] = kind == PricerKind::European ? "black-scholes" : "binomial";
    r.passed = mono && endpoint_ok;
    return r;
}

ConvergenceTable bermudan_convergence_table(int lo, int hi, const RunConfig& config) {
    if (lo > hi) throw ConfigError("N range must be ascending");
    const double k = config.option.strike;
    const ModelParams p = config.params();
    ConvergenceTable t;
    t.rows = bermudan_levels(lo, hi, p, config.spec(), config.grid.engine, config.option.spots.front());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        t.richardson.push_back(i == 0 ? std::numeric_limits<double>::quiet_NaN()
                                      : 2.0 * t.rows[i].value - t.rows[i - 1].value);
    }
    const double floor = -config.tolerances.increment_floor * k;

    PropertyReport mono;
    mono.check = "bermudan_monotone";
    mono.tolerance = floor;
    mono.provenance = "property";
    mono.worst_value = 0.0;
    PropertyReport dec;
    dec.check = "bermudan_increments_decreasing";
    dec.tolerance = 0.0;
    dec.provenance = "property";
    dec.passed = true;
    mono.passed = true;
    for (std::size_t i = 1; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const double w = std::min(row.increment, row.min_increment);
        if (i == 1 || w < mono.worst_value) {
            mono.worst_value = w;
            mono.worst_location = "N=" + std::to_string(row.level);
        }
        if (w < floor) mono.passed = false;
        if (row.level >= 3 && i >= 2 && !(row.increment < t.rows[i - 1].increment)) {
            dec.passed = false;
            dec.worst_location = "N=" + std::to_string(row.level);
            dec.worst_value = row.increment - t.rows[i - 1].increment;
        }
    }
    const double last_max = t.rows.size() > 1 ? std::max(std::abs(t.rows.back().max_increment),
                                                         std::abs(t.rows.back().min_increment))
                                              : std::numeric_limits<double>::infinity();
    t.final_below_tol = last_max < config.grid.american_tol * k;
    mono.details["final_max_increment"] = last_max;
    mono.details["final_below_tol"] = t.final_below_tol;
    t.reports.push_back(mono);
    t.reports.push_back(dec);

    if (p.alpha == 2.0) {
        PropertyReport b;
        b.check = "bermudan_vs_binomial";
        b.provenance = "oracle";
        b.tolerance = config.tolerances.binomial_rel;
        const double s0 = config.option.spots.front();
        const double ref = binomial_american_put(s0, k, p.rate, config.model.sigma_bs, config.option.expiry,
                                                 config.scan.binomial_steps);
        b.worst_value = std::abs(t.rows.back().value - ref) / ref;
        b.worst_location = "N=" + std::to_string(t.rows.back().level) + " S=" + fmt(s0);
        b.details["binomial"] = ref;
        b.details["steps"] = config.scan.binomial_steps;
        b.details["bermudan"] = t.rows.back().value;
        b.passed = b.worst_value < b.tolerance;
        t.reports.push_back(b);
    }
    return t;
}

ResidualStudy residual_report(const RunConfig& config) {
    const ModelParams p = config.params();
    const OptionSpec spec = config.spec();
    const double k = spec.strike;
    const double lo = std::log(k) + config.grid.residual_lo;
    const double hi = std::log(k) + config.grid.residual_hi;
    const std::size_t n = config.grid.residual_points;
    ResidualStudy st;

    PropertyReport exact;
    exact.check = "residual_exact_solutions";
    exact.provenance = "closed-form";
    exact.tolerance = config.tolerances.residual_noise;
    {
        const FracGrid ge = FracGrid::uniform(lo, hi, n, Extension::affine(0.0, 1.0));
        std::vector<double> v(n), zero(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) v[i] = std::exp(ge.x(i));
        const double e_rel = max_interior(fpde_residual(v, zero, ge, p)) / std::exp(hi);

        const double t = config.grid.residual_t;
        const double bond = k * std::exp(-p.rate * (spec.expiry - t));
        const FracGrid gb = FracGrid::uniform(lo, hi, n, Extension::affine(bond, 0.0));
        const std::vector<double> b(n, bond), bt(n, p.rate * bond);
        const double b_rel = max_interior(fpde_residual(b, bt, gb, p)) / bond;

        const FracGrid go = FracGrid::uniform(lo, std::log(k) - 0.01, n, Extension::affine(k, -1.0));
        std::vector<double> ob(n);
        for (std::size_t i = 0; i < n; ++i) ob[i] = k - std::exp(go.x(i));
        const auto ores = fpde_residual(ob, zero, go, p);
        double obstacle_max = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i + 1 < n; ++i) obstacle_max = std::max(obstacle_max, ores[i]);

        exact.worst_value = std::max(e_rel, b_rel);
        exact.worst_location = e_rel >= b_rel ? "V=e^x" : "V=K e^{-r(T-t)}";
        exact.details["asset_relative"] = e_rel;
        exact.details["bond_relative"] = b_rel;
        exact.details["obstacle_max"] = obstacle_max;
        exact.details["obstacle_expected"] = -p.rate * k;
        exact.passed = e_rel <= exact.tolerance && b_rel <= exact.tolerance &&
                       obstacle_max <= config.tolerances.residual_noise * k;
    }
    st.reports.push_back(exact);

    st.points = {n, 2 * n - 1, 4 * n - 3};
    for (std::size_t m : st.points) {
        auto slice = european_residual(p, spec, config.grid.residual_t, lo, hi, m);
        st.max_residual.push_back(slice.max_interior);
        if (m == st.points.back()) st.finest = std::move(slice);
    }
    for (std::size_t i = 1; i < st.max_residual.size(); ++i) {
        st.orders.push_back(std::log2(st.max_residual[i - 1] / st.max_residual[i]));
    }
    PropertyReport order;
    order.check = "residual_order_european";
    order.provenance = "closed-form";
    order.tolerance = config.tolerances.residual_order;
    order.worst_value = *std::min_element(st.orders.begin(), st.orders.end());
    order.worst_location = "alpha=" + fmt(p.alpha);
    const double ratio = st.max_residual[0] / st.max_residual[1];
    order.details["ratio_h_over_h2"] = ratio;
    order.details["ratio_tolerance"] = config.tolerances.residual_ratio;
    order.details["max_residual"] = st.max_residual;
    order.details["orders"] = st.orders;
    order.passed = order.worst_value >= order.tolerance && ratio >= config.tolerances.residual_ratio;
    st.reports.push_back(order);
    return st;
}

// ---------------------------------------------------------------------------

namespace {

JobResult job_price_european(const RunConfig& c) {
    JobResult out;
    Table t{"prices", {"S", "K", "t", "price", "tol"}, {}};
    const ModelParams p = c.params();
    const OptionSpec spec = c.spec();
    for (double s : c.option.spots) {
        t.rows.push_back({s, spec.strike, c.option.t, price_put(s, c.option.t, p, spec), kPriceTolerance * spec.strike});
    }
    out.tables.push_back(std::move(t));
    return out;
}

JobResult job_price_american(const RunConfig& c) {
    JobResult out;
    const ModelParams p = c.params();
    const OptionSpec spec{c.option.strike, c.option.expiry - c.option.t};
    const auto am = american_price(c.grid.american_tol, p, spec, c.grid.engine, c.option.spots.front());
    Table t{"prices", {"S", "K", "t", "price", "european", "level", "tol"}, {}};
    for (double s : c.option.spots) {
        t.rows.push_back({s, spec.strike, c.option.t, am.surface.value_at(s), price_put(s, 0.0, p, spec),
                          am.level_used, c.grid.american_tol * spec.strike});
    }
    Table h{"history", {"N", "B_N", "increment", "max_increment", "min_increment"}, {}};
    for (const auto& r : am.history) h.rows.push_back({r.level, r.value, r.increment, r.max_increment, r.min_increment});
    out.tables.push_back(std::move(t));
    out.tables.push_back(std::move(h));
    return out;
}

JobResult job_boundary(const RunConfig& c) {
    JobResult out;
    const ModelParams p = c.params();
    const OptionSpec spec = c.spec();
    const double k = spec.strike;
    const auto am = american_price(c.grid.american_tol, p, spec, c.grid.engine, c.option.spots.front());
    const auto bounds = extract_boundary(am.surface);
    const auto rep = smooth_pasting_report(am.surface, bounds);

    Table b{"boundary", {"t", "S_star", "pasting_gap"}, {}};
    for (const auto& e : bounds) {
        if (e.present) b.rows.push_back({e.t, std::exp(e.x_star), e.pasting_gap});
    }
    Table pr{"pasting", {"t", "S_star", "value_matching_error", "interpolation_tolerance", "pasting_gap"}, {}};
    for (const auto& row : rep.rows) {
        pr.rows.push_back({row.t, row.s_star, row.value_matching_error, row.interpolation_tolerance, row.pasting_gap});
    }
    Table surf{"surface", {"t", "x", "S", "V", "exercise_flag"}, {}};
    {
        const auto& s = am.surface;
        const std::size_t stride = std::max<std::size_t>(1, (s.slices() - 1) / 32);
        for (std::size_t kk = 0; kk < s.slices(); ++kk) {
            if (kk % stride != 0 && kk + 1 != s.slices()) continue;
            for (std::size_t i = 0; i < s.grid.n; ++i) {
                const double x = s.grid.x(i), S = std::exp(x);
                if (S < c.scan.s_lo || S > c.scan.s_hi) continue;
                surf.rows.push_back({s.t[kk], x, S, s.values[kk][i], static_cast<int>(s.exercise[kk][i])});
            }
        }
    }

    PropertyReport vm;
    vm.check = "value_matching";
    vm.provenance = "property";
    vm.worst_value = rep.max_value_matching_error;
    double worst_ratio = 0.0;
    for (const auto& row : rep.rows) {
        const double ratio = row.value_matching_error / row.interpolation_tolerance;
        if (ratio >= worst_ratio) {
            worst_ratio = ratio;
            vm.worst_location = "t=" + fmt(row.t);
            vm.tolerance = row.interpolation_tolerance;
        }
    }
    vm.details["worst_error_over_tolerance"] = worst_ratio;
    vm.details["slices"] = rep.rows.size();
    vm.passed = rep.value_matching_ok;

    PropertyReport itm;
    itm.check = "boundary_in_the_money";
    itm.provenance = "property";
    itm.tolerance = k;
    double s_max = 0.0;
    for (const auto& row : rep.rows) {
        if (row.s_star >= s_max) {
            s_max = row.s_star;
            itm.worst_location = "t=" + fmt(row.t);
        }
    }
    itm.worst_value = s_max;
    itm.passed = rep.strictly_in_the_money;

    PropertyReport gap;
    gap.check = "smooth_pasting_refinement";
    gap.provenance = "property";
    gap.tolerance = c.tolerances.pasting_order;
    Table ref{"pasting_refinement", {"N", "h", "median_gap", "max_gap", "order"}, {}};
    double prev = 0.0;
    double worst_order = std::numeric_limits<double>::infinity();
    double h = 8e-3;
    for (int level = 3; level <= 7; level += 2, h /= 2) {
        EngineGrid g = c.grid.engine;
        g.h_max = h;
        g.finest_level = level;
        g.window = 0.0;
        const auto s = bermudan_surface(level, p, spec, g);
        const auto r = smooth_pasting_report(s, extract_boundary(s));
        double order = std::numeric_limits<double>::quiet_NaN();
        if (prev > 0.0) {
            order = std::log2(prev / r.median_gap);
            if (order < worst_order) {
                worst_order = order;
                gap.worst_location = "N=" + std::to_string(level);
            }
        }
        ref.rows.push_back({level, s.grid.h, r.median_gap, r.max_gap, order});
        prev = r.median_gap;
    }
    gap.worst_value = worst_order;
    gap.passed = worst_order >= gap.tolerance;
    gap.details["median_gap_final"] = rep.median_gap;
    gap.details["max_gap_final"] = rep.max_gap;

    out.tables = {std::move(b), std::move(pr), std::move(ref), std::move(surf)};
    out.reports = {vm, itm, gap};
    return out;
}

JobResult job_scan_alpha(const RunConfig& c) {
    JobResult out;
    Table t{"alpha_scan", {"pricer", "alpha", "sigma", "S", "price", "reference"}, {}};
    for (PricerKind k : c.scan.pricers) out.reports.push_back(scan_alpha(c.scan.alphas, k, c.scan.spots, c, &t));
    out.tables.push_back(std::move(t));
    return out;
}

JobResult job_scan_convexity(const RunConfig& c) {
    JobResult out;
    Table t{"convexity", {"pricer", "alpha", "t", "min_second_difference", "S_at_min"}, {}};
    const auto s_grid = linspace(c.scan.s_lo, c.scan.s_hi, c.scan.s_points);
    struct Item {
        PricerKind kind;
        double alpha;
    };
    std::vector<Item> items;
    for (PricerKind k : c.scan.pricers) {
        for (double a : c.scan.convexity_alphas) items.push_back({k, a});
    }
    const auto results = parallel_map(std::span<const Item>(items), [&](const Item& it) {
        Table local{"", t.columns, {}};
        auto rep = scan_convexity(it.kind, it.alpha, s_grid, c.scan.times, c, &local);
        return std::make_pair(std::move(rep), std::move(local));
    });
    for (const auto& [rep, local] : results) {
        out.reports.push_back(rep);
        t.rows.insert(t.rows.end(), local.rows.begin(), local.rows.end());
    }
    out.tables.push_back(std::move(t));
    return out;
}

JobResult job_converge(const RunConfig& c) {
    JobResult out;
    auto ct = bermudan_convergence_table(c.grid.level_lo, c.grid.level_hi, c);
    Table t{"convergence", {"N", "B_N", "increment", "max_increment", "min_increment", "richardson"}, {}};
    for (std::size_t i = 0; i < ct.rows.size(); ++i) {
        const auto& r = ct.rows[i];
        t.rows.push_back({r.level, r.value, r.increment, r.max_increment, r.min_increment, ct.richardson[i]});
    }
    out.tables.push_back(std::move(t));
    out.reports = std::move(ct.reports);
    return out;
}

JobResult job_residual(const RunConfig& c) {
    JobResult out;
    auto st = residual_report(c);
    Table t{"residual_refinement", {"n", "h", "max_residual", "order"}, {}};
    const double width = c.grid.residual_hi - c.grid.residual_lo;
    for (std::size_t i = 0; i < st.points.size(); ++i) {
        t.rows.push_back({st.points[i], width / static_cast<double>(st.points[i] - 1), st.max_residual[i],
                          i == 0 ? std::numeric_limits<double>::quiet_NaN() : st.orders[i - 1]});
    }
    Table s{"residual", {"x", "V", "residual"}, {}};
    for (std::size_t i = 0; i < st.finest.x.size(); ++i) {
        s.rows.push_back({st.finest.x[i], st.finest.value[i], st.finest.residual[i]});
    }
    out.tables = {std::move(t), std::move(s)};
    out.reports = std::move(st.reports);
    return out;
}

JobResult job_mc(const RunConfig& c) {
    JobResult out;
    const McJobConfig m = c.mc_or_default();
    const ModelParams p = c.params(m.alpha);
    const OptionSpec spec = c.spec();
    const double sig = c.tolerances.mc_sigmas;
    Table t{"mc", {"check", "estimate", "reference", "std_error", "z"}, {}};

    const auto est = mc_european_put(m.spot, p, spec, m.mc);
    const double ref = price_put(m.spot, 0.0, p, spec);
    const double z = std::abs(est.value - ref) / est.std_error;
    t.rows.push_back({"european_put", est.value, ref, est.std_error, z});
    PropertyReport put{"mc_european_put", z < sig, z, "S=" + fmt(m.spot), sig, "MC", {}};
    put.details = {{"estimate", est.value}, {"closed_form", ref}, {"std_error", est.std_error}, {"paths", est.n_paths}};

    const auto mart = martingale_check(p, m.mc, spec.expiry);
    t.rows.push_back({"martingale", mart.relative_error, 0.0, mart.std_error, mart.z});
    PropertyReport mr{"mc_martingale", mart.z < sig, mart.z, "T=" + fmt(spec.expiry), sig, "MC", {}};
    mr.details = {{"relative_error", mart.relative_error}, {"std_error", mart.std_error}};

    const auto neg = martingale_check(p, m.mc, spec.expiry, true);
    t.rows.push_back({"negative_control", neg.relative_error, 0.0, neg.std_error, neg.z});
    PropertyReport nr{"mc_negative_control", neg.z > c.tolerances.negative_control_sigmas, neg.z,
                      "drift without convexity adjustment", c.tolerances.negative_control_sigmas, "MC", {}};
    nr.details = {{"relative_error", neg.relative_error}, {"std_error", neg.std_error}};

    out.tables.push_back(std::move(t));
    out.reports = {put, mr, nr};
    return out;
}

}  // namespace

JobResult run_job(const std::string& verb, const RunConfig& config) {
    if (verb == "price-european") return job_price_european(config);
    if (verb == "price-american") return job_price_american(config);
    if (verb == "boundary") return job_boundary(config);
    if (verb == "scan-alpha") return job_scan_alpha(config);
    if (verb == "scan-convexity") return job_scan_convexity(config);
    if (verb == "converge-bermudan") return job_converge(config);
    if (verb == "residual") return job_residual(config);
    if (verb == "mc-check") return job_mc(config);
    throw ConfigError("unknown job '" + verb + "'");
}

// ---------------------------------------------------------------------------

std::filesystem::path resolve_output_dir(const RunConfig& config) {
    if (const char* env = std::getenv("FMLS_OUTPUT_DIR"); env && *env) return env;
    return config.output.directory;
}

namespace {

json error_record(const std::string& kind, const std::string& message, int code, const std::string& job = "") {
    json e{{"error", kind}, {"message", message}, {"exit_code", code}};
    if (!job.empty()) e["job"] = job;
    return e;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write " + path.string());
    os << content;
}

}  // namespace

int run(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& err) {
    try {
        config.validate();
    } catch (const ConfigError& e) {
        err << error_record("config", e.what(), kExitConfigError).dump() << '\n';
        return kExitConfigError;
    }
    const std::vector<std::string> jobs = config.jobs.empty() ? std::vector<std::string>{"price-european"} : config.jobs;
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        err << error_record("config", "cannot create output directory: " + ec.message(), kExitConfigError).dump() << '\n';
        return kExitConfigError;
    }

    json manifest{{"version", version_string()},
                  {"isa", std::string(simd::isa_name(simd::active_isa()))},
                  {"config", to_json(config)},
                  {"seed", config.mc_or_default().mc.seed},
                  {"jobs", jobs},
                  {"artifacts", json::array()},
                  {"reports", json::array()}};
    int code = kExitOk;
    json failure;
    for (const auto& job : jobs) {
        std::string stem = job;
        std::replace(stem.begin(), stem.end(), '-', '_');
        try {
            const JobResult res = run_job(job, config);
            for (const auto& t : res.tables) {
                const std::string name = stem + "_" + t.name + (config.output.format == "csv" ? ".csv" : ".json");
                if (config.output.format == "csv") {
                    std::ostringstream os;
                    t.write_csv(os);
                    write_file(out_dir / name, os.str());
                } else {
                    write_file(out_dir / name, t.to_json().dump(2) + "\n");
                }
                manifest["artifacts"].push_back(name);
            }
            if (!res.reports.empty()) {
                json reps = json::array();
                for (const auto& r : res.reports) {
                    reps.push_back(r.to_json());
                    manifest["reports"].push_back({{"job", job}, {"check", r.check}, {"passed", r.passed}});
                }
                const std::string name = stem + "_report.json";
                write_file(out_dir / name, reps.dump(2) + "\n");
                manifest["artifacts"].push_back(name);
            }
            if (!res.passed() && code == kExitOk) code = kExitCheckFailed;
        } catch (const ConfigError& e) {
            failure = error_record("config", e.what(), kExitConfigError, job);
            code = kExitConfigError;
        } catch (const DomainError& e) {
            failure = error_record("domain", e.what(), kExitConfigError, job);
            code = kExitConfigError;
        } catch (const ConvergenceError& e) {
            failure = error_record("convergence", e.what(), kExitNumericalError, job);
            failure["last_increment"] = e.last_increment();
            code = kExitNumericalError;
        } catch (const NumericalAccuracyError& e) {
            failure = error_record("numerical_accuracy", e.what(), kExitNumericalError, job);
            failure["achieved"] = e.achieved();
            code = kExitNumericalError;
        } catch (const ContractError& e) {
            failure = error_record("contract", e.what(), kExitNumericalError, job);
            code = kExitNumericalError;
        }
        if (!failure.is_null()) break;
    }
    manifest["exit_code"] = code;
    if (!failure.is_null()) {
        manifest["error"] = failure;
        err << failure.dump() << '\n';
    }
    write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
    return code;
}

int run(const std::filesystem::path& config_file, std::ostream& err) {
    RunConfig config;
    try {
        std::ifstream in(config_file, std::ios::binary);
        if (!in) throw ConfigError("cannot read " + config_file.string());
        std::ostringstream text;
        text << in.rdbuf();
        config = parse_run_config(text.str());
    } catch (const ConfigError& e) {
        err << error_record("config", e.what(), kExitConfigError).dump() << '\n';
        return kExitConfigError;
    }
    return run(config, resolve_output_dir(config), err);
}

}  // namespace fmls
