#pragma once

// Bermudan puts by backward induction on a log-price lattice, dyadic
// refinement towards the American price, and free-boundary diagnostics.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "fmls/european.hpp"
#include "fmls/model.hpp"

namespace fmls {

struct EngineGrid {
    /// Half-width W of the lattice around ln K; 0 selects 8 (nu T)^(1/alpha) + 0.5.
    double window = 0.0;
    /// Upper bound on the lattice spacing.
    double h_max = 2e-3;
    /// Lattice is resolved for steps down to T 2^-finest_level.
    int finest_level = 10;
    /// At most this many time slices are kept (every 2^k-th date).
    std::size_t max_stored_slices = 1025;
    /// Largest admissible upward transition mass out of the window per step.
    double max_leakage = 1e-5;
};

/// Hard cap on the refinement level.
inline constexpr int kMaxLevel = 12;

/// Payoff must exceed continuation by more than this (times K) to flag exercise.
inline constexpr double kExerciseMargin = 1e-12;

struct ValueSurface {
    LogGrid grid;
    std::vector<double> t;                          ///< stored slice times, ascending; last is T
    std::vector<std::vector<double>> values;        ///< V per slice
    std::vector<std::vector<double>> continuation;  ///< discounted one-period value per slice
    std::vector<std::vector<std::uint8_t>> exercise;
    int level = 0;
    double alpha = 0.0;
    double strike = 0.0;
    double expiry = 0.0;
    double leakage = 0.0;  ///< worst upward mass out of the window per step
    /// Highest node unaffected by the far-field cut; diagnostics use nodes 0..trusted_hi.
    std::size_t trusted_hi = 0;

    std::size_t slices() const noexcept { return t.size(); }
    /// V at spot S on slice k (cubic interpolation in log-price).
    double value_at(double spot, std::size_t k) const;
    /// V at spot S at t = 0.
    double value_at(double spot) const { return value_at(spot, 0); }

    /// CSV t,x,S,V,exercise_flag restricted to S in [s_lo, s_hi].
    void write_csv(std::ostream& os, double s_lo, double s_hi) const;
};

/// Lattice used for a given model and grid spec.
LogGrid engine_lattice(const ModelParams& params, const OptionSpec& spec, const EngineGrid& grid);

/// Exercise dates {0, T 2^-N, ..., T}. Throws ConfigError when the window
/// leaks more than grid.max_leakage (message gives the required window).
ValueSurface bermudan_surface(int level, const ModelParams& params, const OptionSpec& spec,
                              const EngineGrid& grid = {});

struct ConvergenceRow {
    int level = 0;
    double value = 0.0;      ///< B_N(S0, 0)
    double increment = 0.0;  ///< B_N(S0, 0) - B_{N-1}(S0, 0); 0 on the first row
    double max_increment = 0.0;  ///< max over lattice nodes of B_N - B_{N-1} at t = 0
    double min_increment = 0.0;  ///< min over lattice nodes (>= -1e-12 K expected)
};

struct AmericanResult {
    ValueSurface surface;
    int level_used = 0;
    std::vector<ConvergenceRow> history;
};

/// Raises N from 0 until max_S |B_{N+1} - B_N| < tol K (S over the trusted
/// nodes); returns the finest
/// surface. Throws ConvergenceError carrying the last increment when
/// grid.finest_level is reached first.
AmericanResult american_price(double tol, const ModelParams& params, const OptionSpec& spec,
                              const EngineGrid& grid = {}, double spot = 0.0);

/// Rows for levels lo..hi (inclusive) on one lattice; no convergence test.
std::vector<ConvergenceRow> bermudan_levels(int lo, int hi, const ModelParams& params,
                                            const OptionSpec& spec, const EngineGrid& grid,
                                            double spot);

struct ExerciseBoundary {
    double t = 0.0;
    bool present = false;
    double x_star = 0.0;
    double pasting_gap = 0.0;         ///< |dV/dx + e^x| at x_star, continuation side
    double value_matching_error = 0.0;
    double interpolation_tolerance = 0.0;
};

/// One entry per stored slice before expiry.
std::vector<ExerciseBoundary> extract_boundary(const ValueSurface& surface);

struct PastingRow {
    double t = 0.0;
    double s_star = 0.0;
    double value_matching_error = 0.0;
    double interpolation_tolerance = 0.0;
    double pasting_gap = 0.0;
};

struct SmoothPastingReport {
    std::vector<PastingRow> rows;
    double max_gap = 0.0;
    double median_gap = 0.0;
    double max_value_matching_error = 0.0;
    bool value_matching_ok = true;  ///< error <= tolerance on every slice
    bool strictly_in_the_money = true;
};

SmoothPastingReport smooth_pasting_report(const ValueSurface& surface,
                                          const std::vector<ExerciseBoundary>& boundaries);

/// CSV t,S_star,pasting_gap (present entries only).
void write_boundary_csv(std::ostream& os, const std::vector<ExerciseBoundary>& boundaries);

/// Postcondition audit of the ValueSurface invariants.
struct SurfaceAudit {
    double terminal_error = 0.0;        ///< max |V(x,T) - payoff|
    double payoff_shortfall = 0.0;      ///< max (payoff - V), should be <= 1e-9 K
    double obstacle_error = 0.0;        ///< max |V - max(payoff, C)|
    double monotone_violation = 0.0;    ///< max increase of V along x
    double time_violation = 0.0;        ///< max decrease of V as t decreases
};
SurfaceAudit audit_surface(const ValueSurface& surface);

}  // namespace fmls
