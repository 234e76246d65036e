#pragma once

// Property scans, report assembly and the JSON-configured job runner behind
// the command-line tool.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fmls/exercise.hpp"
#include "fmls/fractional.hpp"
#include "fmls/mc.hpp"
#include "fmls/model.hpp"

namespace fmls {

enum class PricerKind { European, American };

struct ModelConfig {
    double alpha = 1.4;
    double sigma_bs = 0.25;
    VolNormalization normalization = VolNormalization::FixedSigma;
    double rate = 0.05;
};

struct OptionConfig {
    double strike = 100.0;
    double expiry = 1.0;
    double t = 0.0;
    std::vector<double> spots{100.0};
};

struct GridConfig {
    EngineGrid engine;
    double american_tol = 5e-5;        ///< max_S |B_{N+1} - B_N| / K
    int level_lo = 0;
    int level_hi = 10;
    std::size_t residual_points = 401;
    double residual_lo = -2.5;         ///< relative to ln K
    double residual_hi = 1.5;
    double residual_t = 0.5;
};

struct ScanConfig {
    std::vector<double> alphas{1.4, 1.6, 1.8, 2.0};
    std::vector<double> spots{100.0, 110.0, 120.0, 140.0};
    std::vector<double> convexity_alphas{1.4, 1.7, 2.0};
    std::vector<double> times{0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<PricerKind> pricers{PricerKind::European, PricerKind::American};
    double s_lo = 50.0;
    double s_hi = 150.0;
    std::size_t s_points = 101;
    std::size_t binomial_steps = 10000;
};

struct OutputConfig {
    std::string directory = "fmls_out";
    std::string format = "csv";  ///< csv | json
};

struct McJobConfig {
    MCConfig mc;
    double alpha = 1.5;
    double spot = 100.0;
};

struct Tolerances {
    double convexity = 1e-6;        ///< x K
    double alpha_monotone = 1e-6;   ///< x K
    double bs_endpoint = 1e-4;      ///< x K
    double binomial_rel = 5e-3;
    double increment_floor = 1e-12; ///< x K
    double residual_order = 0.9;
    double residual_ratio = 1.85;
    double residual_noise = 1e-9;   ///< relative to max |V|
    double pasting_order = 0.5;
    double mc_sigmas = 3.0;
    double negative_control_sigmas = 10.0;
};

struct RunConfig {
    std::vector<std::string> jobs;
    ModelConfig model;
    OptionConfig option;
    GridConfig grid;
    ScanConfig scan;
    OutputConfig output;
    std::optional<McJobConfig> mc;
    Tolerances tolerances;

    /// Model parameters at tail index alpha under the configured normalization.
    ModelParams params(double alpha) const;
    ModelParams params() const { return params(model.alpha); }
    OptionSpec spec() const { return OptionSpec{option.strike, option.expiry}; }
    McJobConfig mc_or_default() const { return mc.value_or(McJobConfig{}); }

    /// Throws ConfigError on any inconsistent field.
    void validate() const;
};

/// Verbs understood by run_job, in canonical order.
const std::vector<std::string>& job_names();

/// Parses one JSON document; unknown keys and malformed input raise ConfigError.
RunConfig parse_run_config(std::string_view text);
RunConfig run_config_from_json(const nlohmann::json& doc);

/// Fully resolved configuration, defaults included.
nlohmann::json to_json(const RunConfig& config);

struct PropertyReport {
    std::string check;
    bool passed = false;
    double worst_value = 0.0;
    std::string worst_location;
    double tolerance = 0.0;
    std::string provenance;  ///< closed-form | oracle | MC | property
    nlohmann::json details = nlohmann::json::object();

    nlohmann::json to_json() const;
};

/// Named table with a header; cells are numbers or strings.
struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<nlohmann::json>> rows;

    void write_csv(std::ostream& os) const;
    nlohmann::json to_json() const;
};

struct JobResult {
    std::vector<Table> tables;
    std::vector<PropertyReport> reports;

    bool passed() const;
};

/// Minimum second difference in S over all slices; European prices on the
/// uniform s_grid at each t, American values on the lattice nodes inside
/// [s_grid.front(), s_grid.back()] on every stored slice.
PropertyReport scan_convexity(PricerKind kind, double alpha, std::span<const double> s_grid,
                              std::span<const double> t_list, const RunConfig& config,
                              Table* rows = nullptr);

/// Non-increasing prices along the alpha sweep at each S >= K, plus the
/// alpha = 2 reference check when 2 is in the sweep.
PropertyReport scan_alpha(std::span<const double> alphas, PricerKind kind, std::span<const double> spots,
                          const RunConfig& config, Table* rows = nullptr);

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows;
    std::vector<double> richardson;  ///< 2 B_N - B_{N-1}; reported only
    bool final_below_tol = false;
    std::vector<PropertyReport> reports;
};

ConvergenceTable bermudan_convergence_table(int lo, int hi, const RunConfig& config);

struct ResidualStudy {
    std::vector<std::size_t> points;
    std::vector<double> max_residual;
    std::vector<double> orders;
    ResidualSlice finest;
    std::vector<PropertyReport> reports;
};

/// Exact-solution checks plus the European refinement study (h, h/2, h/4).
ResidualStudy residual_report(const RunConfig& config);

/// Executes one verb.
JobResult run_job(const std::string& verb, const RunConfig& config);

/// Exit codes of run.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitNumericalError = 3;

/// Runs every job, writes artifacts and a manifest into out_dir and
/// returns the exit code. Errors are reported on err as one JSON line.
int run(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& err);

/// Reads and parses the file, applies FMLS_OUTPUT_DIR, then runs. Malformed
/// input exits 2 before anything is written.
int run(const std::filesystem::path& config_file, std::ostream& err);

/// Output directory after the FMLS_OUTPUT_DIR override.
std::filesystem::path resolve_output_dir(const RunConfig& config);

std::string version_string();

}  // namespace fmls
