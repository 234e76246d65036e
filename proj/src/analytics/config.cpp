#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "fmls/analytics.hpp"
#include "fmls/errors.hpp"

namespace fmls {

using nlohmann::json;

namespace {

// Reads the members of one JSON object and rejects anything left over.
class Section {
public:
    Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
        if (!doc_.is_object()) throw ConfigError(path_ + ": expected an object");
    }

    ~Section() noexcept(false) {
        if (std::uncaught_exceptions() > 0) return;
        for (const auto& [key, value] : doc_.items()) {
            if (!seen_.count(key)) throw ConfigError("unknown key '" + where(key) + "'");
        }
    }

    template <class T>
    void read(const char* key, T& out) {
        seen_.insert(key);
        const auto it = doc_.find(key);
        if (it == doc_.end()) return;
        try {
            out = it->template get<T>();
        } catch (const json::exception& e) {
            throw ConfigError("bad value for '" + where(key) + "': " + e.what());
        }
    }

    void read_unsigned(const char* key, std::uint64_t& out) {
        seen_.insert(key);
        const auto it = doc_.find(key);
        if (it == doc_.end()) return;
        if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0)) {
            throw ConfigError("'" + where(key) + "' must be a non-negative integer");
        }
        out = it->get<std::uint64_t>();
    }

    const json* child(const char* key) {
        seen_.insert(key);
        const auto it = doc_.find(key);
        return it == doc_.end() ? nullptr : &*it;
    }

    std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    const json& doc_;
    std::string path_;
    std::set<std::string> seen_;
};

std::string normalization_name(VolNormalization v) {
    return v == VolNormalization::FixedSigma ? "fixed_sigma" : "matched_nu";
}

VolNormalization parse_normalization(const std::string& s) {
    if (s == "fixed_sigma") return VolNormalization::FixedSigma;
    if (s == "matched_nu") return VolNormalization::MatchedNu;
    throw ConfigError("model.normalization must be fixed_sigma or matched_nu");
}

std::string pricer_name(PricerKind k) { return k == PricerKind::European ? "european" : "american"; }

PricerKind parse_pricer(const std::string& s) {
    if (s == "european") return PricerKind::European;
    if (s == "american") return PricerKind::American;
    throw ConfigError("scan.pricers entries must be european or american");
}

void check(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}

bool finite_all(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

const std::vector<std::string>& job_names() {
    static const std::vector<std::string> names{"price-european", "price-american", "boundary",
                                                "scan-alpha",     "scan-convexity", "converge-bermudan",
                                                "residual",       "mc-check"};
    return names;
}

ModelParams RunConfig::params(double alpha) const {
    return ModelParams{alpha, normalized_sigma(alpha, model.sigma_bs, model.normalization), model.rate};
}

void RunConfig::validate() const {
    for (const auto& j : jobs) {
        check(std::find(job_names().begin(), job_names().end(), j) != job_names().end(), "unknown job '" + j + "'");
    }
    try {
        params().validate();
        spec().validate();
        for (double a : scan.alphas) params(a).validate();
        for (double a : scan.convexity_alphas) params(a).validate();
        if (mc) params(mc->alpha).validate();
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
    check(option.t >= 0.0 && option.t < option.expiry, "option.t must lie in [0, expiry)");
    check(!option.spots.empty() && finite_all(option.spots) &&
              std::all_of(option.spots.begin(), option.spots.end(), [](double s) { return s > 0.0; }),
          "option.spots must be positive");
    check(grid.american_tol > 0.0, "grid.american_tol must be positive");
    check(grid.engine.finest_level >= 0 && grid.engine.finest_level <= kMaxLevel,
          "grid.finest_level must lie in [0, " + std::to_string(kMaxLevel) + "]");
    check(grid.level_lo >= 0 && grid.level_lo <= grid.level_hi && grid.level_hi <= grid.engine.finest_level,
          "grid.levels must be ascending within [0, finest_level]");
    check(grid.engine.h_max > 0.0 && grid.engine.window >= 0.0 && grid.engine.max_leakage > 0.0,
          "grid spacing, window and leakage must be positive");
    check(grid.engine.max_stored_slices >= 2, "grid.max_stored_slices must be at least 2");
    check(grid.residual_points >= 16, "grid.residual_points must be at least 16");
    check(grid.residual_lo < 0.0 && grid.residual_hi > 0.0, "residual window must contain ln K");
    check(grid.residual_t > 0.0 && grid.residual_t < option.expiry, "grid.residual_t must lie in (0, expiry)");
    check(std::is_sorted(scan.alphas.begin(), scan.alphas.end()) && !scan.alphas.empty(),
          "scan.alphas must be non-empty and ascending");
    check(!scan.convexity_alphas.empty(), "scan.convexity_alphas must be non-empty");
    check(!scan.pricers.empty(), "scan.pricers must be non-empty");
    check(!scan.spots.empty() && finite_all(scan.spots), "scan.spots must be non-empty");
    check(scan.s_points >= 16, "scan.s_points must be at least 16");
    check(scan.s_lo > 0.0 && scan.s_hi > scan.s_lo, "scan S range must satisfy 0 < s_lo < s_hi");
    check(std::all_of(scan.times.begin(), scan.times.end(), [&](double t) { return t >= 0.0 && t <= option.expiry; }),
          "scan.times must lie in [0, expiry]");
    check(scan.binomial_steps >= 1, "scan.binomial_steps must be positive");
    check(output.format == "csv" || output.format == "json", "output.format must be csv or json");
    check(!output.directory.empty(), "output.directory must not be empty");
    if (mc) mc->mc.validate();
    check(mc_or_default().spot > 0.0, "mc.spot must be positive");
}

RunConfig parse_run_config(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("malformed JSON: ") + e.what());
    }
    return run_config_from_json(doc);
}

RunConfig run_config_from_json(const json& doc) {
    RunConfig c;
    {
        Section top(doc, "");
        top.read("jobs", c.jobs);
        if (const json* m = top.child("model")) {
            Section s(*m, "model");
            s.read("alpha", c.model.alpha);
            s.read("sigma_bs", c.model.sigma_bs);
            s.read("rate", c.model.rate);
            std::string norm = normalization_name(c.model.normalization);
            s.read("normalization", norm);
            c.model.normalization = parse_normalization(norm);
        }
        if (const json* o = top.child("option")) {
            Section s(*o, "option");
            s.read("strike", c.option.strike);
            s.read("expiry", c.option.expiry);
            s.read("t", c.option.t);
            s.read("spots", c.option.spots);
        }
        if (const json* g = top.child("grid")) {
            Section s(*g, "grid");
            s.read("window", c.grid.engine.window);
            s.read("h_max", c.grid.engine.h_max);
            s.read("finest_level", c.grid.engine.finest_level);
            s.read("max_stored_slices", c.grid.engine.max_stored_slices);
            s.read("max_leakage", c.grid.engine.max_leakage);
            s.read("american_tol", c.grid.american_tol);
            std::vector<int> levels{c.grid.level_lo, c.grid.level_hi};
            s.read("levels", levels);
            if (levels.size() != 2) throw ConfigError("grid.levels must be [lo, hi]");
            c.grid.level_lo = levels[0];
            c.grid.level_hi = levels[1];
            s.read("residual_points", c.grid.residual_points);
            s.read("residual_lo", c.grid.residual_lo);
            s.read("residual_hi", c.grid.residual_hi);
            s.read("residual_t", c.grid.residual_t);
        }
        if (const json* sc = top.child("scan")) {
            Section s(*sc, "scan");
            s.read("alphas", c.scan.alphas);
            s.read("spots", c.scan.spots);
            s.read("convexity_alphas", c.scan.convexity_alphas);
            s.read("times", c.scan.times);
            std::vector<std::string> pricers;
            for (auto k : c.scan.pricers) pricers.push_back(pricer_name(k));
            s.read("pricers", pricers);
            c.scan.pricers.clear();
            for (const auto& p : pricers) c.scan.pricers.push_back(parse_pricer(p));
            s.read("s_lo", c.scan.s_lo);
            s.read("s_hi", c.scan.s_hi);
            s.read("s_points", c.scan.s_points);
            s.read("binomial_steps", c.scan.binomial_steps);
        }
        if (const json* o = top.child("output")) {
            Section s(*o, "output");
            s.read("directory", c.output.directory);
            s.read("format", c.output.format);
        }
        if (const json* m = top.child("mc")) {
            McJobConfig mc;
            Section s(*m, "mc");
            s.read_unsigned("n_paths", mc.mc.n_paths);
            s.read_unsigned("seed", mc.mc.seed);
            s.read("antithetic", mc.mc.antithetic);
            s.read("threads", mc.mc.threads);
            s.read("alpha", mc.alpha);
            s.read("spot", mc.spot);
            c.mc = mc;
        }
        if (const json* t = top.child("tolerances")) {
            Section s(*t, "tolerances");
            auto& tol = c.tolerances;
            s.read("convexity", tol.convexity);
            s.read("alpha_monotone", tol.alpha_monotone);
            s.read("bs_endpoint", tol.bs_endpoint);
            s.read("binomial_rel", tol.binomial_rel);
            s.read("increment_floor", tol.increment_floor);
            s.read("residual_order", tol.residual_order);
            s.read("residual_ratio", tol.residual_ratio);
            s.read("residual_noise", tol.residual_noise);
            s.read("pasting_order", tol.pasting_order);
            s.read("mc_sigmas", tol.mc_sigmas);
            s.read("negative_control_sigmas", tol.negative_control_sigmas);
        }
    }
    c.validate();
    return c;
}

json to_json(const RunConfig& c) {
    json j;
    j["jobs"] = c.jobs;
    j["model"] = {{"alpha", c.model.alpha},
                  {"sigma_bs", c.model.sigma_bs},
                  {"rate", c.model.rate},
                  {"normalization", normalization_name(c.model.normalization)}};
    j["option"] = {{"strike", c.option.strike}, {"expiry", c.option.expiry}, {"t", c.option.t}, {"spots", c.option.spots}};
    j["grid"] = {{"window", c.grid.engine.window},
                 {"h_max", c.grid.engine.h_max},
                 {"finest_level", c.grid.engine.finest_level},
                 {"max_stored_slices", c.grid.engine.max_stored_slices},
                 {"max_leakage", c.grid.engine.max_leakage},
                 {"american_tol", c.grid.american_tol},
                 {"levels", {c.grid.level_lo, c.grid.level_hi}},
                 {"residual_points", c.grid.residual_points},
                 {"residual_lo", c.grid.residual_lo},
                 {"residual_hi", c.grid.residual_hi},
                 {"residual_t", c.grid.residual_t}};
    std::vector<std::string> pricers;
    for (auto k : c.scan.pricers) pricers.push_back(pricer_name(k));
    j["scan"] = {{"alphas", c.scan.alphas},
                 {"spots", c.scan.spots},
                 {"convexity_alphas", c.scan.convexity_alphas},
                 {"times", c.scan.times},
                 {"pricers", pricers},
                 {"s_lo", c.scan.s_lo},
                 {"s_hi", c.scan.s_hi},
                 {"s_points", c.scan.s_points},
                 {"binomial_steps", c.scan.binomial_steps}};
    j["output"] = {{"directory", c.output.directory}, {"format", c.output.format}};
    const McJobConfig mc = c.mc_or_default();
    j["mc"] = {{"n_paths", mc.mc.n_paths},
               {"seed", mc.mc.seed},
               {"antithetic", mc.mc.antithetic},
               {"threads", mc.mc.threads},
               {"alpha", mc.alpha},
               {"spot", mc.spot}};
    const auto& t = c.tolerances;
    j["tolerances"] = {{"convexity", t.convexity},
                       {"alpha_monotone", t.alpha_monotone},
                       {"bs_endpoint", t.bs_endpoint},
                       {"binomial_rel", t.binomial_rel},
                       {"increment_floor", t.increment_floor},
                       {"residual_order", t.residual_order},
                       {"residual_ratio", t.residual_ratio},
                       {"residual_noise", t.residual_noise},
                       {"pasting_order", t.pasting_order},
                       {"mc_sigmas", t.mc_sigmas},
                       {"negative_control_sigmas", t.negative_control_sigmas}};
    return j;
}

}  // namespace fmls
