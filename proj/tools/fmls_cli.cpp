// fmls: pricing jobs and property checks from the command line.
//
//   fmls <verb> [--config FILE] [flags]     verb = price-european | price-american | boundary |
//                                            scan-alpha | scan-convexity | converge-bermudan |
//                                            residual | mc-check
//   fmls run FILE                           runs the jobs listed in FILE
//
// Precedence: flags > config file > defaults. The output directory is taken
// from --output-dir, else FMLS_OUTPUT_DIR, else the config.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "fmls/analytics.hpp"
#include "fmls/errors.hpp"

namespace {

struct Flags {
    std::string config;
    std::optional<double> alpha, sigma_bs, rate, strike, expiry, t, american_tol;
    std::optional<std::string> normalization, format, output_dir;
    std::vector<double> spots;
    std::optional<std::uint64_t> seed, paths;
    std::optional<int> finest_level;
    bool antithetic = false;
};

void add_common(CLI::App* app, Flags& f) {
    app->add_option("--config", f.config, "JSON run configuration");
    app->add_option("--alpha", f.alpha, "tail index in (1, 2]");
    app->add_option("--sigma-bs", f.sigma_bs, "volatility anchor");
    app->add_option("--normalization", f.normalization, "fixed_sigma | matched_nu");
    app->add_option("--rate", f.rate, "risk-free rate");
    app->add_option("--strike", f.strike, "strike K");
    app->add_option("--expiry", f.expiry, "expiry T");
    app->add_option("--t", f.t, "valuation time");
    app->add_option("--spot", f.spots, "spot(s)");
    app->add_option("--american-tol", f.american_tol, "American convergence tolerance (x K)");
    app->add_option("--finest-level", f.finest_level, "refinement cap");
    app->add_option("--seed", f.seed, "Monte Carlo seed");
    app->add_option("--paths", f.paths, "Monte Carlo paths");
    app->add_flag("--antithetic", f.antithetic, "antithetic Monte Carlo");
    app->add_option("--format", f.format, "csv | json");
    app->add_option("--output-dir", f.output_dir, "artifact directory");
}

nlohmann::json load(const std::string& path) {
    if (path.empty()) return nlohmann::json::object();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw fmls::ConfigError("cannot read " + path);
    std::ostringstream text;
    text << in.rdbuf();
    try {
        return nlohmann::json::parse(text.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw fmls::ConfigError(std::string("malformed JSON: ") + e.what());
    }
}

void apply_flags(nlohmann::json& doc, const Flags& f) {
    if (!doc.is_object()) throw fmls::ConfigError("configuration must be a JSON object");
    auto set = [&](const char* section, const char* key, const auto& v) {
        if (v) doc[section][key] = *v;
    };
    set("model", "alpha", f.alpha);
    set("model", "sigma_bs", f.sigma_bs);
    set("model", "normalization", f.normalization);
    set("model", "rate", f.rate);
    set("option", "strike", f.strike);
    set("option", "expiry", f.expiry);
    set("option", "t", f.t);
    if (!f.spots.empty()) doc["option"]["spots"] = f.spots;
    set("grid", "american_tol", f.american_tol);
    set("grid", "finest_level", f.finest_level);
    set("mc", "seed", f.seed);
    set("mc", "n_paths", f.paths);
    if (f.antithetic) doc["mc"]["antithetic"] = true;
    set("output", "format", f.format);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FMLS option-pricing laboratory"};
    app.require_subcommand(1);
    app.set_version_flag("--version", fmls::version_string());
    Flags flags;
    std::vector<std::pair<std::string, CLI::App*>> verbs;
    for (const auto& v : fmls::job_names()) {
        auto* sub = app.add_subcommand(v, "run the " + v + " job");
        add_common(sub, flags);
        verbs.emplace_back(v, sub);
    }
    std::string run_file;
    auto* run_cmd = app.add_subcommand("run", "run the jobs listed in a config file");
    run_cmd->add_option("config", run_file, "JSON run configuration")->required();
    std::optional<std::string> run_out;
    run_cmd->add_option("--output-dir", run_out, "artifact directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : fmls::kExitConfigError;
    }

    try {
        if (run_cmd->parsed()) {
            if (!run_out) return fmls::run(run_file, std::cerr);
            auto config = fmls::run_config_from_json(load(run_file));
            return fmls::run(config, *run_out, std::cerr);
        }
        for (const auto& [name, sub] : verbs) {
            if (!sub->parsed()) continue;
            auto doc = load(flags.config);
            apply_flags(doc, flags);
            doc["jobs"] = {name};
            const auto config = fmls::run_config_from_json(doc);
            const auto dir = flags.output_dir ? std::filesystem::path(*flags.output_dir) : fmls::resolve_output_dir(config);
            return fmls::run(config, dir, std::cerr);
        }
    } catch (const fmls::ConfigError& e) {
        std::cerr << nlohmann::json{{"error", "config"}, {"message", e.what()}, {"exit_code", fmls::kExitConfigError}}.dump()
                  << '\n';
        return fmls::kExitConfigError;
    }
    return fmls::kExitConfigError;
}
