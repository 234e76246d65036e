#include "fmls/mc.hpp"

#include <algorithm>
#include <atomic>
#include <boost/accumulators/accumulators.hpp>
#include <boost/accumulators/statistics/stats.hpp>
#include <boost/accumulators/statistics/sum_kahan.hpp>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>
#include <thread>

#include "fmls/errors.hpp"

namespace fmls {

namespace {

namespace acc = boost::accumulators;
using KahanSum = acc::accumulator_set<double, acc::stats<acc::tag::sum_kahan>>;

std::mt19937_64 block_engine(std::uint64_t seed, std::uint64_t block) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32)};
    return std::mt19937_64(seq);
}

// Open interval (0, 1), symmetric under u -> 1 - u.
double open_uniform(std::mt19937_64& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1p-53;
}

std::uint64_t block_count(std::uint64_t n) { return (n + kPathsPerBlock - 1) / kPathsPerBlock; }

template <class Body>
void for_each_block(std::uint64_t blocks, unsigned threads, Body body) {
    unsigned workers = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::uint64_t>(workers, blocks));
    if (workers <= 1) {
        for (std::uint64_t b = 0; b < blocks; ++b) body(b);
        return;
    }
    std::atomic<std::uint64_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::uint64_t b = next++; b < blocks; b = next++) body(b);
        });
    }
}

struct Moments {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::uint64_t count = 0;
};

// Mean and standard error of f(M) over the configured paths; antithetic
// pairs count as one observation.
template <class F>
MCEstimate simulate(double alpha, const MCConfig& mc, F f) {
    mc.validate();
    const std::uint64_t blocks = block_count(mc.n_paths);
    std::vector<Moments> parts(blocks);
    for_each_block(blocks, mc.threads, [&](std::uint64_t b) {
        auto rng = block_engine(mc.seed, b);
        const std::uint64_t begin = b * kPathsPerBlock;
        const std::uint64_t end = std::min(mc.n_paths, begin + kPathsPerBlock);
        KahanSum s, s2;
        Moments m;
        for (std::uint64_t p = begin; p < end; p += mc.antithetic ? 2 : 1) {
            const double u1 = open_uniform(rng);
            const double u2 = open_uniform(rng);
            double y = f(stable_variate(alpha, u1, u2));
            if (mc.antithetic) y = 0.5 * (y + f(stable_variate(alpha, 1.0 - u1, 1.0 - u2)));
            s(y);
            s2(y * y);
            ++m.count;
        }
        m.sum = acc::sum_kahan(s);
        m.sum_sq = acc::sum_kahan(s2);
        parts[b] = m;
    });
    KahanSum s, s2;
    std::uint64_t count = 0;
    for (const auto& m : parts) {
        s(m.sum);
        s2(m.sum_sq);
        count += m.count;
    }
    const double n = static_cast<double>(count);
    const double mean = acc::sum_kahan(s) / n;
    const double var = count > 1 ? std::max(0.0, (acc::sum_kahan(s2) / n - mean * mean) * n / (n - 1.0)) : 0.0;
    return MCEstimate{mean, std::sqrt(var / n), mc.n_paths};
}

}  // namespace

void MCConfig::validate() const {
    if (n_paths == 0) throw ConfigError("n_paths must be at least 1");
    if (antithetic && n_paths % 2 != 0) throw ConfigError("antithetic sampling needs an even n_paths");
}

double stable_variate(double alpha, double u1, double u2) {
    if (!(alpha > 1.0 && alpha <= 2.0)) throw DomainError("alpha must lie in (1, 2]");
    const double v = std::numbers::pi * (u1 - 0.5);
    const double w = -std::log(u2);
    if (alpha == 2.0) {
        // Gaussian limit of the transform: 2 sin(v) sqrt(w) ~ N(0, 2)
        return 2.0 * std::sin(v) * std::sqrt(w);
    }
    // Chambers-Mallows-Stuck, beta = 1, then rescaled so that
    // E[e^{-theta M}] = e^{theta^alpha}.
    const double t = std::tan(std::numbers::pi * alpha / 2.0);
    const double b = std::atan(t) / alpha;
    const double s = std::pow(1.0 + t * t, 1.0 / (2.0 * alpha));
    const double x = s * std::sin(alpha * (v + b)) / std::pow(std::cos(v), 1.0 / alpha) *
                     std::pow(std::cos(v - alpha * (v + b)) / w, (1.0 - alpha) / alpha);
    const double scale = std::pow(-std::cos(std::numbers::pi * alpha / 2.0), 1.0 / alpha);
    return scale * x;
}

std::vector<double> sample_stable(double alpha, std::size_t n, std::uint64_t seed) {
    if (!(alpha > 1.0 && alpha <= 2.0)) throw DomainError("alpha must lie in (1, 2]");
    std::vector<double> out(n);
    const std::uint64_t blocks = block_count(n);
    for_each_block(blocks, 0, [&](std::uint64_t b) {
        auto rng = block_engine(seed, b);
        const std::uint64_t begin = b * kPathsPerBlock;
        const std::uint64_t end = std::min<std::uint64_t>(n, begin + kPathsPerBlock);
        for (std::uint64_t p = begin; p < end; ++p) {
            const double u1 = open_uniform(rng);
            const double u2 = open_uniform(rng);
            out[p] = stable_variate(alpha, u1, u2);
        }
    });
    return out;
}

MCEstimate mc_european_put(double spot, const ModelParams& params, const OptionSpec& spec,
                           const MCConfig& mc) {
    params.validate();
    if (!(spot > 0.0)) throw DomainError("spot must be positive");
    if (spec.strike == 0.0 && spec.expiry > 0.0) {
        mc.validate();
        return MCEstimate{0.0, 0.0, mc.n_paths};
    }
    spec.validate();
    const double nu = convexity_adjustment(params.alpha, params.sigma);
    const double theta = std::pow(nu * spec.expiry, 1.0 / params.alpha);
    const double x0 = std::log(spot) + (params.rate - nu) * spec.expiry;
    const double k = spec.strike;
    const double discount = std::exp(-params.rate * spec.expiry);
    auto est = simulate(params.alpha, mc, [&](double m) { return std::max(k - std::exp(x0 - theta * m), 0.0); });
    est.value *= discount;
    est.std_error *= discount;
    return est;
}

MartingaleResult martingale_check(const ModelParams& params, const MCConfig& mc, double horizon,
                                  bool drop_adjustment) {
    params.validate();
    if (!(horizon > 0.0)) throw DomainError("horizon must be positive");
    const double nu = convexity_adjustment(params.alpha, params.sigma);
    const double theta = std::pow(nu * horizon, 1.0 / params.alpha);
    const double drift = drop_adjustment ? 0.0 : -nu * horizon;
    const auto est = simulate(params.alpha, mc, [&](double m) { return std::exp(drift - theta * m); });
    MartingaleResult r;
    r.relative_error = std::abs(est.value - 1.0);
    r.std_error = est.std_error;
    r.z = r.std_error > 0.0 ? r.relative_error / r.std_error : (r.relative_error > 0.0 ? INFINITY : 0.0);
    r.passed = r.z < 3.0;
    return r;
}

void write_draws_csv(std::ostream& os, std::span<const double> draws) {
    os << "draw\n";
    os.precision(17);
    for (double d : draws) os << d << '\n';
}

}  // namespace fmls
