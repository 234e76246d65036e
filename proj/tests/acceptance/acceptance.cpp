// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "fmls/analytics.hpp"
#include "fmls/density.hpp"
#include "fmls/european.hpp"
#include "fmls/exercise.hpp"
#include "fmls/mc.hpp"
#include "fmls/model.hpp"

using namespace fmls;

namespace {

struct Outcome {
    bool passed = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            passed = false;
            detail << " [fail: " << what << "]";
        }
    }
};

ModelParams normalized(double alpha, double rate = 0.05) {
    return ModelParams{alpha, normalized_sigma(alpha, 0.25, VolNormalization::FixedSigma), rate};
}

const OptionSpec kSpec{100.0, 1.0};

void absorb(Outcome& o, const PropertyReport& r) {
    o.require(r.passed, r.check + " worst " + std::to_string(r.worst_value) + " at " + r.worst_location);
}

void c1(Outcome& o) {
    const auto p = normalized(2.0);
    double worst = 0.0;
    for (double s = 50.0; s <= 150.0; s += 20.0) {
        const double bs = bs_put_reference(s, 100.0, 0.05, 0.25, 1.0);
        const double rel = std::abs(price_put(s, 0.0, p, kSpec) - bs) / bs;
        worst = std::max(worst, rel);
        o.require(rel < 1e-4, "S=" + std::to_string(s));
    }
    o.detail << " max rel err " << worst;
}

void c2(Outcome& o) {
    for (double a : {1.3, 1.4, 1.5, 1.7, 1.9, 2.0}) {
        const auto& t = shared_table(a);
        o.require(t.normalization_error() < 1e-6, "normalization alpha=" + std::to_string(a));
        double worst = 0.0;
        for (double th : {0.1, 0.5, 1.0}) {
            worst = std::max(worst, std::abs(t.exp_moment(th) - std::exp(std::pow(th, a))));
        }
        o.require(worst < 1e-5, "exp moment alpha=" + std::to_string(a));
        o.detail << " a=" << a << " norm " << t.normalization_error() << " mom " << worst;
        if (a < 2.0) {
            o.require(std::abs(t.tail_exponent() + 1.0 + a) <= 0.05, "tail slope alpha=" + std::to_string(a));
            o.detail << " slope " << t.tail_exponent();
        } else {
            o.require(t.tail_exponent() <= -(1.0 + a), "tail slope alpha=2");
            o.detail << " slope " << t.tail_exponent() << " (Gaussian, steeper than any power)";
        }
    }
}

void c3(Outcome& o) {
    const auto p = normalized(1.5);
    const auto est = mc_european_put(100.0, p, kSpec, MCConfig{});
    const double ref = price_put(100.0, 0.0, p, kSpec);
    const double z = std::abs(est.value - ref) / est.std_error;
    o.require(z < 3.0, "put");
    const auto mart = martingale_check(p, MCConfig{});
    o.require(mart.passed, "martingale");
    const auto neg = martingale_check(p, MCConfig{}, 1.0, true);
    o.require(neg.z > 10.0, "negative control");
    o.detail << " put z " << z << ", martingale z " << mart.z << ", control z " << neg.z;
}

void c4(Outcome& o) {
    for (double a : {1.4, 2.0}) {
        RunConfig c;
        c.model.alpha = a;
        c.option.spots = {100.0};
        const auto t = bermudan_convergence_table(0, 10, c);
        for (const auto& r : t.reports) absorb(o, r);
        o.detail << " a=" << a << " B10 " << t.rows.back().value;
    }
}

void c5(Outcome& o) {
    RunConfig c;
    std::vector<double> s(101);
    for (int i = 0; i <= 100; ++i) s[i] = 50.0 + i;
    for (auto kind : {PricerKind::European, PricerKind::American}) {
        for (double a : {1.4, 1.7, 2.0}) {
            const auto r = scan_convexity(kind, a, s, c.scan.times, c);
            absorb(o, r);
            o.detail << " " << r.check << " " << r.worst_value;
        }
    }
}

void c6(Outcome& o) {
    RunConfig c;
    const std::vector<double> alphas{1.4, 1.6, 1.8, 2.0};
    const std::vector<double> spots{100.0, 110.0, 120.0, 140.0};
    for (auto kind : {PricerKind::European, PricerKind::American}) {
        const auto r = scan_alpha(alphas, kind, spots, c);
        absorb(o, r);
        o.detail << " " << r.check << " worst step " << r.worst_value;
    }
}

void c7(Outcome& o) {
    const auto r = residual_report(RunConfig{});
    for (const auto& rep : r.reports) absorb(o, rep);
    o.detail << " max residuals";
    for (double m : r.max_residual) o.detail << " " << m;
    o.detail << ", orders";
    for (double q : r.orders) o.detail << " " << q;
}

void c8(Outcome& o) {
    const auto res = run_job("boundary", RunConfig{});
    for (const auto& r : res.reports) {
        absorb(o, r);
        o.detail << " " << r.check << " " << r.worst_value;
    }
}

void c9(Outcome& o) {
    const double tol = GridConfig{}.american_tol;
    for (double a : {1.5, 2.0}) {
        const auto p = normalized(a, 0.0);
        const auto am = american_price(tol, p, kSpec);
        double worst = 0.0;
        for (double s = 50.0; s <= 150.0; s += 10.0) {
            worst = std::max(worst, std::abs(am.surface.value_at(s) - price_put(s, 0.0, p, kSpec)));
        }
        o.require(worst <= tol * kSpec.strike, "alpha=" + std::to_string(a));
        o.detail << " a=" << a << " max |A-E| " << worst;
    }
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double budget_s;
        std::function<void(Outcome&)> body;
    };
    const std::vector<Criterion> all{
        {1, "Black-Scholes reduction", 10, c1},
        {2, "density integrity", 60, c2},
        {3, "Monte Carlo agreement", 120, c3},
        {4, "Bermudan to American convergence", 300, c4},
        {5, "convexity in S", 0, c5},
        {6, "alpha monotonicity", 0, c6},
        {7, "FPDE residual", 0, c7},
        {8, "free-boundary diagnostics", 0, c8},
        {9, "r = 0 degeneracy", 0, c9},
    };
    int failed = 0;
    for (const auto& c : all) {
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.body(o);
        } catch (const std::exception& e) {
            o.require(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.budget_s > 0) o.require(secs < c.budget_s, "runtime over " + std::to_string(c.budget_s) + " s");
        if (!o.passed) ++failed;
        std::printf("criterion %d %s: %s (%.2f s)%s\n", c.id, c.name, o.passed ? "PASS" : "FAIL", secs,
                    o.detail.str().c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(all.size()) - failed, all.size());
    return failed == 0 ? 0 : 1;
}
