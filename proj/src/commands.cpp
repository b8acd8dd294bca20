#include "kronprec/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "kronprec/assumptions.hpp"
#include "kronprec/error.hpp"
#include "kronprec/heuristic.hpp"
#include "kronprec/rates.hpp"
#include "kronprec/rng.hpp"
#include "kronprec/sampling.hpp"
#include "kronprec/smgm.hpp"

namespace kronprec::cli {

namespace {

[[noreturn]] void config_error(const std::string& msg) {
    throw Error(ErrorKind::ConfigError, msg);
}

void reject_unknown(const Json& obj, std::initializer_list<const char*> allowed,
                    const std::string& ctx) {
    if (!obj.is_object()) config_error(ctx + ": expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        const bool known = std::any_of(allowed.begin(), allowed.end(),
                                       [&](const char* a) { return it.key() == a; });
        if (!known) config_error(ctx + ": unknown key '" + it.key() + "'");
    }
}

std::uint64_t as_uint(const Json& v, const std::string& where) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
        return static_cast<std::uint64_t>(v.get<std::int64_t>());
    }
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (d >= 0.0 && d == std::floor(d) && d < 1.8e19) return static_cast<std::uint64_t>(d);
    }
    config_error(where + ": expected a non-negative integer");
}

std::uint64_t get_uint(const Json& o, const char* key, std::uint64_t def, const std::string& ctx,
                       std::uint64_t min_value = 0) {
    const std::uint64_t v = o.contains(key) ? as_uint(o.at(key), ctx + "." + key) : def;
    if (v < min_value) {
        config_error(ctx + "." + key + ": must be >= " + std::to_string(min_value));
    }
    return v;
}

double get_double(const Json& o, const char* key, double def, const std::string& ctx) {
    if (!o.contains(key)) return def;
    const Json& v = o.at(key);
    if (!v.is_number() || !std::isfinite(v.get<double>())) {
        config_error(ctx + "." + key + ": expected a finite number");
    }
    return v.get<double>();
}

double get_nonneg(const Json& o, const char* key, double def, const std::string& ctx) {
    const double v = get_double(o, key, def, ctx);
    if (v < 0.0) config_error(ctx + "." + key + ": must be >= 0");
    return v;
}

double get_positive(const Json& o, const char* key, double def, const std::string& ctx) {
    const double v = get_double(o, key, def, ctx);
    if (!(v > 0.0)) config_error(ctx + "." + key + ": must be > 0");
    return v;
}

bool get_bool(const Json& o, const char* key, bool def, const std::string& ctx) {
    if (!o.contains(key)) return def;
    if (!o.at(key).is_boolean()) config_error(ctx + "." + key + ": expected true or false");
    return o.at(key).get<bool>();
}

std::string get_string(const Json& o, const char* key, const std::string& def,
                       const std::string& ctx) {
    if (!o.contains(key)) return def;
    if (!o.at(key).is_string()) config_error(ctx + "." + key + ": expected a string");
    return o.at(key).get<std::string>();
}

std::string require_string(const Json& o, const char* key, const std::string& ctx) {
    if (!o.contains(key)) config_error(ctx + "." + key + ": required");
    const std::string s = get_string(o, key, "", ctx);
    if (s.empty()) config_error(ctx + "." + key + ": must not be empty");
    return s;
}

std::vector<std::uint64_t> get_uint_list(const Json& o, const char* key,
                                         const std::vector<std::uint64_t>& def,
                                         const std::string& ctx, std::uint64_t min_value) {
    if (!o.contains(key)) return def;
    const Json& v = o.at(key);
    const std::string where = ctx + "." + key;
    std::vector<std::uint64_t> out;
    if (v.is_array()) {
        for (const Json& e : v) out.push_back(as_uint(e, where));
    } else {
        out.push_back(as_uint(v, where));
    }
    if (out.empty()) config_error(where + ": must not be empty");
    for (std::uint64_t x : out) {
        if (x < min_value) config_error(where + ": values must be >= " + std::to_string(min_value));
    }
    return out;
}

Json object_or_empty(const Json& o, const char* key, const std::string& ctx) {
    if (!o.contains(key)) return Json::object();
    if (!o.at(key).is_object()) config_error(ctx + "." + key + ": expected an object");
    return o.at(key);
}

Json top_level(const Json& config, std::initializer_list<const char*> allowed,
               const std::string& ctx) {
    if (!config.is_object()) config_error(ctx + ": config must be a JSON object");
    check_schema_version(config, ctx);
    Json c = config;
    c.erase("schema_version");
    reject_unknown(c, allowed, ctx);
    return c;
}

// ---- shared sections ----

Json resolve_model(const Json& m, const std::string& ctx) {
    reject_unknown(m, {"design", "bandwidth", "strength", "s1", "s2", "tau1", "seed"}, ctx);
    const std::string design = get_string(m, "design", "identity", ctx);
    Json r;
    r["design"] = design;
    if (design == "identity") {
        for (const char* k : {"bandwidth", "strength", "s1", "s2", "tau1", "seed"}) {
            if (m.contains(k)) config_error(ctx + "." + k + ": not used by the identity design");
        }
        return r;
    }
    if (design == "banded") {
        for (const char* k : {"s1", "s2"}) {
            if (m.contains(k)) config_error(ctx + "." + k + ": not used by the banded design");
        }
        r["bandwidth"] = get_uint(m, "bandwidth", 1, ctx, 1);
    } else if (design == "random") {
        if (m.contains("bandwidth")) config_error(ctx + ".bandwidth: not used by the random design");
        r["s1"] = get_uint(m, "s1", 0, ctx);
        r["s2"] = get_uint(m, "s2", 0, ctx);
    } else {
        config_error(ctx + ".design: expected identity, banded or random");
    }
    r["strength"] = get_nonneg(m, "strength", 0.3, ctx);
    const double tau1 = get_double(m, "tau1", 0.5, ctx);
    if (!(tau1 > 0.0 && tau1 < 1.0)) config_error(ctx + ".tau1: must lie in (0, 1)");
    r["tau1"] = tau1;
    r["seed"] = get_uint(m, "seed", 1, ctx);
    return r;
}

ModelSpec model_spec(const Json& model, std::size_t p, std::size_t q) {
    ModelSpec spec;
    spec.p = p;
    spec.q = q;
    const std::string design = model.at("design").get<std::string>();
    if (design == "identity") return spec;
    spec.tau1 = model.at("tau1").get<double>();
    spec.model_seed = model.at("seed").get<std::uint64_t>();
    const double strength = model.at("strength").get<double>();
    if (design == "banded") {
        spec.design = BandedDesign{model.at("bandwidth").get<std::size_t>(), strength};
    } else {
        spec.design = RandomSupportDesign{model.at("s1").get<std::size_t>(),
                                          model.at("s2").get<std::size_t>(), strength};
    }
    return spec;
}

// s guesses may be a count or "model" (use the true sparsity) where a model exists.
Json resolve_penalty(const Json& pen, const std::string& ctx, bool model_available,
                     const std::string& default_mode) {
    reject_unknown(pen, {"mode", "lambda1", "lambda2", "c0", "s1_guess", "s2_guess"}, ctx);
    const std::string mode = get_string(pen, "mode", default_mode, ctx);
    Json r;
    r["mode"] = mode;
    if (mode == "fixed") {
        for (const char* k : {"c0", "s1_guess", "s2_guess"}) {
            if (pen.contains(k)) config_error(ctx + "." + k + ": only used with mode 'schedule'");
        }
        r["lambda1"] = get_nonneg(pen, "lambda1", 0.0, ctx);
        r["lambda2"] = get_nonneg(pen, "lambda2", 0.0, ctx);
    } else if (mode == "schedule") {
        for (const char* k : {"lambda1", "lambda2"}) {
            if (pen.contains(k)) config_error(ctx + "." + k + ": only used with mode 'fixed'");
        }
        r["c0"] = get_nonneg(pen, "c0", 1.0, ctx);
        for (const char* k : {"s1_guess", "s2_guess"}) {
            if (pen.contains(k) && pen.at(k).is_string()) {
                if (pen.at(k).get<std::string>() != "model" || !model_available) {
                    config_error(ctx + "." + k + ": expected a count" +
                                 (model_available ? std::string(" or \"model\"") : ""));
                }
                r[k] = "model";
            } else {
                r[k] = model_available && !pen.contains(k) ? Json("model")
                                                           : Json(get_uint(pen, k, 0, ctx));
            }
        }
    } else {
        config_error(ctx + ".mode: expected fixed or schedule");
    }
    return r;
}

PenaltyConfig penalty_for(const Json& pen, std::size_t n, std::size_t p, std::size_t q,
                          std::size_t model_s1, std::size_t model_s2) {
    if (pen.at("mode") == "fixed") {
        return PenaltyConfig{pen.at("lambda1").get<double>(), pen.at("lambda2").get<double>()};
    }
    auto guess = [](const Json& g, std::size_t truth) {
        return g.is_string() ? truth : g.get<std::size_t>();
    };
    return lambda_schedule(n, p, q, guess(pen.at("s1_guess"), model_s1),
                           guess(pen.at("s2_guess"), model_s2), pen.at("c0").get<double>());
}

Json resolve_smgm_options(const Json& o, const std::string& ctx) {
    reject_unknown(o, {"init", "outer_tol", "max_outer", "glasso_tol", "glasso_max_sweeps",
                       "balance_scale"},
                   ctx);
    Json r;
    const std::string init = get_string(o, "init", "identity", ctx);
    if (init != "identity" && init != "heuristic") {
        config_error(ctx + ".init: expected identity or heuristic");
    }
    r["init"] = init;
    r["outer_tol"] = get_positive(o, "outer_tol", 1e-8, ctx);
    r["max_outer"] = get_uint(o, "max_outer", 100, ctx, 1);
    r["glasso_tol"] = get_positive(o, "glasso_tol", kDefaultGlassoTol, ctx);
    r["glasso_max_sweeps"] = get_uint(o, "glasso_max_sweeps", kDefaultGlassoSweeps, ctx, 1);
    r["balance_scale"] = get_bool(o, "balance_scale", true, ctx);
    return r;
}

SmgmOptions smgm_options(const Json& o) {
    SmgmOptions s;
    s.init = o.at("init") == "heuristic" ? InitKind::Heuristic : InitKind::Identity;
    s.outer_tol = o.at("outer_tol").get<double>();
    s.max_outer = static_cast<int>(o.at("max_outer").get<std::uint64_t>());
    s.glasso_tol = o.at("glasso_tol").get<double>();
    s.glasso_max_sweeps = static_cast<int>(o.at("glasso_max_sweeps").get<std::uint64_t>());
    s.balance_scale = o.at("balance_scale").get<bool>();
    return s;
}

Json matrix_json(const Matrix& m) {
    Json rows = Json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json header(const char* command, const Json& resolved) {
    Json out;
    out["schema_version"] = kSchemaVersion;
    out["command"] = command;
    out["config"] = resolved;
    return out;
}

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void ensure_distinct_paths(const std::vector<std::string>& paths, const std::string& ctx) {
    for (std::size_t i = 0; i < paths.size(); ++i)
        for (std::size_t j = i + 1; j < paths.size(); ++j)
            if (paths[i] == paths[j]) config_error(ctx + ": output paths must differ");
}

}  // namespace

// ---- config plumbing ----

Json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open config '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw Error(ErrorKind::ParseError, "config '" + path + "': " + e.what());
    }
}

void apply_override(Json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        config_error("override '" + assignment + "': expected key=value");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    Json value;
    try {
        value = Json::parse(text);
    } catch (const Json::parse_error&) {
        value = text;
    }
    if (!config.is_object()) config = Json::object();
    Json* node = &config;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos
                                                                            : dot - start);
        if (part.empty()) config_error("override '" + assignment + "': empty key segment");
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        Json& child = (*node)[part];
        if (child.is_null()) child = Json::object();
        if (!child.is_object()) {
            config_error("override '" + assignment + "': '" + part + "' is not an object");
        }
        node = &child;
        start = dot + 1;
    }
}

void check_schema_version(const Json& document, const std::string& context) {
    if (!document.is_object() || !document.contains("schema_version")) return;
    const Json& v = document.at("schema_version");
    if (!v.is_string()) config_error(context + ".schema_version: expected a string like \"1.0\"");
    const std::string s = v.get<std::string>();
    const std::string major = s.substr(0, s.find('.'));
    if (major != std::to_string(kSchemaMajor)) {
        throw Error(ErrorKind::ParseError, context + ": unsupported schema_version '" + s +
                                               "' (supported major: " +
                                               std::to_string(kSchemaMajor) + ")");
    }
}

void write_json_file(const std::string& path, const Json& document) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoError, "cannot write '" + path + "'");
    out << document.dump(2) << '\n';
    if (!out) throw Error(ErrorKind::IoError, "write to '" + path + "' failed");
}

// ---- simulate ----

Json resolve_simulate(const Json& config) {
    const std::string ctx = "simulate";
    const Json c = top_level(config, {"n", "p", "q", "seed", "model", "output"}, ctx);
    Json r;
    r["n"] = get_uint(c, "n", 10, ctx, 1);
    r["p"] = get_uint(c, "p", 2, ctx, 1);
    r["q"] = get_uint(c, "q", 2, ctx, 1);
    r["seed"] = get_uint(c, "seed", 1, ctx);
    r["model"] = resolve_model(object_or_empty(c, "model", ctx), ctx + ".model");
    r["output"] = require_string(c, "output", ctx);
    return r;
}

int cmd_simulate(const Json& config, std::ostream& log) {
    const Json r = resolve_simulate(config);
    const std::size_t p = r["p"].get<std::size_t>();
    const std::size_t q = r["q"].get<std::size_t>();
    const TrueModel model = build_model(model_spec(r["model"], p, q));
    const Dataset data =
        sample_matrix_normal(model, r["n"].get<std::size_t>(), r["seed"].get<std::uint64_t>());
    const std::string path = r["output"].get<std::string>();
    save_dataset(path, data);

    Json meta = header("simulate", r);
    meta["dataset"] = {{"path", path}, {"n", data.n}, {"p", data.p}, {"q", data.q},
                       {"seed", data.seed}};
    meta["model"] = {{"id", model.id},         {"s1", model.s1},
                     {"s2", model.s2},         {"tau1", model.tau1},
                     {"sigma0", matrix_json(model.sigma0)}, {"psi0", matrix_json(model.psi0)},
                     {"omega0", matrix_json(model.omega0)}, {"gamma0", matrix_json(model.gamma0)}};
    write_json_file(path + ".meta.json", meta);
    log << "wrote " << path << " (n=" << data.n << ", p=" << p << ", q=" << q << ")\n";
    return 0;
}

// ---- fit ----

Json resolve_fit(const Json& config) {
    const std::string ctx = "fit";
    const Json c = top_level(
        config, {"dataset", "output", "estimator", "penalty", "smgm", "inverses", "timings"}, ctx);
    Json r;
    r["dataset"] = require_string(c, "dataset", ctx);
    r["output"] = require_string(c, "output", ctx);
    const std::string est = get_string(c, "estimator", "smgm", ctx);
    if (est != "smgm" && est != "heuristic") config_error(ctx + ".estimator: expected smgm or heuristic");
    r["estimator"] = est;
    if (est == "smgm") {
        if (c.contains("inverses")) config_error(ctx + ".inverses: only used by the heuristic estimator");
        r["penalty"] = resolve_penalty(object_or_empty(c, "penalty", ctx), ctx + ".penalty", false,
                                       "fixed");
        r["smgm"] = resolve_smgm_options(object_or_empty(c, "smgm", ctx), ctx + ".smgm");
    } else {
        for (const char* k : {"penalty", "smgm"}) {
            if (c.contains(k)) config_error(ctx + "." + k + ": only used by the smgm estimator");
        }
        r["inverses"] = get_bool(c, "inverses", false, ctx);
    }
    r["timings"] = get_bool(c, "timings", true, ctx);
    return r;
}

int cmd_fit(const Json& config, std::ostream& log) {
    const Json r = resolve_fit(config);
    const Dataset data = load_dataset(r["dataset"].get<std::string>());
    const bool timings = r["timings"].get<bool>();
    Json out = header("fit", r);
    out["dataset"] = {{"n", data.n}, {"p", data.p}, {"q", data.q}, {"seed", data.seed}};
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed_ms = [&] {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    };
    const std::string path = r["output"].get<std::string>();

    if (r["estimator"] == "heuristic") {
        HeuristicEstimates h = heuristic_psi(data);
        Json est;
        est["sigma_hat"] = matrix_json(h.sigma_hat);
        est["psi_hat"] = matrix_json(h.psi_hat);
        est["psi_tilde"] = matrix_json(h.psi_tilde);
        est["t_h"] = h.t_h;
        if (r["inverses"].get<bool>()) {
            try {
                h = heuristic_inverses(std::move(h));
            } catch (const Error& e) {
                if (!e.is_numerical()) throw;
                out["estimates"] = est;
                out["error"] = {{"kind", std::string(to_string(e.kind()))}, {"message", e.what()}};
                write_json_file(path, out);
                log << "error: " << e.what() << '\n';
                return 1;
            }
            est["omega_hat"] = matrix_json(*h.omega_hat);
            est["gamma_hat"] = matrix_json(*h.gamma_hat);
        }
        out["estimates"] = est;
        if (timings) out["timings_ms"] = {{"total", elapsed_ms()}};
        write_json_file(path, out);
        log << "wrote " << path << '\n';
        return 0;
    }

    const PenaltyConfig pen = penalty_for(r["penalty"], data.n, data.p, data.q, 0, 0);
    out["penalty_used"] = {{"lambda1", pen.lambda1}, {"lambda2", pen.lambda2}};
    FitResult fit;
    try {
        fit = smgm_fit(data, pen, smgm_options(r["smgm"]));
    } catch (const Error& e) {
        if (!e.is_numerical()) throw;
        out["error"] = {{"kind", std::string(to_string(e.kind()))}, {"message", e.what()}};
        write_json_file(path, out);
        log << "error: " << e.what() << '\n';
        return 1;
    }
    Json est;
    est["omega_hat"] = matrix_json(fit.omega_hat);
    est["gamma_hat"] = matrix_json(fit.gamma_hat);
    if (data.p == 1 && data.q == 1) {
        est["omega_gamma_product"] = fit.omega_hat(0, 0) * fit.gamma_hat(0, 0);
    }
    out["estimates"] = est;
    out["objective_trace"] = fit.objective_trace;
    out["outer_iterations"] = fit.outer_iterations;
    out["converged"] = fit.converged;
    out["kkt_residual"] = {{"omega_step", fit.half_step_kkt.first},
                           {"gamma_step", fit.half_step_kkt.second}};
    out["glasso_sweeps"] = fit.glasso_sweeps;
    out["scale_unbounded"] = fit.scale_unbounded;
    if (timings) out["timings_ms"] = {{"total", elapsed_ms()}};
    if (!fit.converged) {
        out["error"] = {{"kind", "NoConvergence"},
                        {"message", fit.scale_unbounded
                                        ? "flip-flop iterations did not converge: one factor is "
                                          "diagonal and the objective decreases without a "
                                          "minimizer along the scale direction"
                                        : "flip-flop iterations did not converge"}};
    }
    write_json_file(path, out);
    if (!fit.converged) {
        log << "error: NoConvergence: flip-flop stopped after " << fit.outer_iterations
            << " outer iterations without meeting outer_tol (report written to " << path << ")\n";
        return 1;
    }
    log << "wrote " << path << " (" << fit.outer_iterations << " outer iterations)\n";
    return 0;
}

// ---- rate-sweep ----

Json resolve_rate_sweep(const Json& config) {
    const std::string ctx = "rate-sweep";
    const Json c = top_level(config,
                             {"model", "grid", "estimators", "replicates", "seed", "penalty",
                              "smgm", "workers", "report", "self_test", "output_json",
                              "output_csv"},
                             ctx);
    Json r;
    r["model"] = resolve_model(object_or_empty(c, "model", ctx), ctx + ".model");
    const Json g = object_or_empty(c, "grid", ctx);
    reject_unknown(g, {"n", "p", "q"}, ctx + ".grid");
    r["grid"] = {{"n", get_uint_list(g, "n", {100}, ctx + ".grid", 1)},
                 {"p", get_uint_list(g, "p", {5}, ctx + ".grid", 1)},
                 {"q", get_uint_list(g, "q", {5}, ctx + ".grid", 1)}};
    std::vector<std::string> names{"heuristic"};
    if (c.contains("estimators")) {
        const Json& e = c.at("estimators");
        if (!e.is_array()) config_error(ctx + ".estimators: expected an array of names");
        names.clear();
        for (const Json& x : e) {
            if (!x.is_string()) config_error(ctx + ".estimators: expected an array of names");
            names.push_back(x.get<std::string>());
        }
    }
    r["estimators"] = estimator_names(parse_estimators(names));
    r["replicates"] = get_uint(c, "replicates", 10, ctx, 1);
    r["seed"] = get_uint(c, "seed", 1, ctx);
    r["penalty"] = resolve_penalty(object_or_empty(c, "penalty", ctx), ctx + ".penalty", true,
                                   "schedule");
    r["smgm"] = resolve_smgm_options(object_or_empty(c, "smgm", ctx), ctx + ".smgm");
    r["workers"] = get_uint(c, "workers", 0, ctx);
    const Json rep = object_or_empty(c, "report", ctx);
    const std::string rctx = ctx + ".report";
    reject_unknown(rep,
                   {"min_success_fraction", "slope_tolerance", "min_r_squared", "ratio_low",
                    "ratio_high"},
                   rctx);
    const ReportOptions d;
    const double frac = get_double(rep, "min_success_fraction", d.min_success_fraction, rctx);
    if (!(frac > 0.0 && frac <= 1.0)) config_error(rctx + ".min_success_fraction: must lie in (0, 1]");
    const double lo = get_positive(rep, "ratio_low", d.ratio_low, rctx);
    const double hi = get_positive(rep, "ratio_high", d.ratio_high, rctx);
    if (!(lo <= hi)) config_error(rctx + ": ratio_low must not exceed ratio_high");
    r["report"] = {{"min_success_fraction", frac},
                   {"slope_tolerance", get_nonneg(rep, "slope_tolerance", d.slope_tolerance, rctx)},
                   {"min_r_squared", get_double(rep, "min_r_squared", d.min_r_squared, rctx)},
                   {"ratio_low", lo},
                   {"ratio_high", hi}};
    r["self_test"] = get_bool(c, "self_test", false, ctx);
    r["output_json"] = require_string(c, "output_json", ctx);
    r["output_csv"] = require_string(c, "output_csv", ctx);
    ensure_distinct_paths({r["output_json"], r["output_csv"]}, ctx);
    return r;
}

int cmd_rate_sweep(const Json& config, std::ostream& log) {
    const Json r = resolve_rate_sweep(config);
    const std::vector<std::string> names = r["estimators"].get<std::vector<std::string>>();
    const EstimatorSet estimators = parse_estimators(names);
    const std::size_t replicates = r["replicates"].get<std::size_t>();
    const std::uint64_t seed = r["seed"].get<std::uint64_t>();
    CellOptions opts;
    opts.smgm = smgm_options(r["smgm"]);
    opts.workers = r["workers"].get<std::size_t>();

    std::map<std::pair<std::size_t, std::size_t>, TrueModel> models;
    std::vector<RateCell> cells;
    for (std::size_t p : r["grid"]["p"].get<std::vector<std::size_t>>()) {
        for (std::size_t q : r["grid"]["q"].get<std::vector<std::size_t>>()) {
            auto it = models.find({p, q});
            if (it == models.end()) {
                it = models.emplace(std::make_pair(p, q), build_model(model_spec(r["model"], p, q)))
                         .first;
            }
            const TrueModel& model = it->second;
            for (std::size_t n : r["grid"]["n"].get<std::vector<std::size_t>>()) {
                const PenaltyConfig pen = estimators.smgm
                                              ? penalty_for(r["penalty"], n, p, q, model.s1, model.s2)
                                              : PenaltyConfig{};
                log << "cell n=" << n << " p=" << p << " q=" << q << " ..." << std::flush;
                cells.push_back(run_cell(model, n, pen, replicates, estimators, seed, opts));
                log << " failed " << cells.back().failed_replicates << "/" << replicates << '\n';
            }
        }
    }

    ReportOptions ropt;
    ropt.min_success_fraction = r["report"]["min_success_fraction"].get<double>();
    ropt.slope_tolerance = r["report"]["slope_tolerance"].get<double>();
    ropt.min_r_squared = r["report"]["min_r_squared"].get<double>();
    ropt.ratio_low = r["report"]["ratio_low"].get<double>();
    ropt.ratio_high = r["report"]["ratio_high"].get<double>();
    const RateReport report = build_rate_report(std::move(cells), ropt);

    // CSV: one row per (cell, successful replicate, metric).
    const std::string csv_path = r["output_csv"].get<std::string>();
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw Error(ErrorKind::IoError, "cannot write '" + csv_path + "'");
    csv << "cell_id,n,p,q,s1,s2,lambda1,lambda2,replicate,estimator,error_metric,error_value,"
           "predictor_value,seed\n";
    for (std::size_t id = 0; id < report.cells.size(); ++id) {
        const RateCell& c = report.cells[id];
        for (const std::string& metric : metric_names()) {
            const std::vector<double>& e = metric_errors(c, metric);
            const std::string estimator = metric.rfind("smgm", 0) == 0 ? "smgm"
                                          : (metric == "heur_sigma" || metric == "heur_psi")
                                              ? "heuristic"
                                              : "heuristic_precision";
            const std::string pred =
                c.predictors ? fmt17(metric_predictor(*c.predictors, metric)) : "";
            for (std::size_t k = 0; k < e.size(); ++k) {
                const std::size_t rep = c.replicate_index[k];
                csv << id << ',' << c.n << ',' << c.p << ',' << c.q << ',' << c.s1 << ',' << c.s2
                    << ',' << fmt17(c.lambda1) << ',' << fmt17(c.lambda2) << ',' << rep << ','
                    << estimator << ',' << metric << ',' << fmt17(e[k]) << ',' << pred << ','
                    << c.seeds[rep] << '\n';
            }
        }
    }
    if (!csv) throw Error(ErrorKind::IoError, "write to '" + csv_path + "' failed");

    Json out = header("rate-sweep", r);
    out["measured_object"] =
        "smgm errors are measured at the flip-flop iterate returned by the fitter";
    out["error_scaling"] = {
        {"smgm", "squared Frobenius error divided by dimension; *_aligned after the best scalar multiple"},
        {"heuristic", "spectral norm error"}};
    Json jcells = Json::array();
    for (std::size_t id = 0; id < report.cells.size(); ++id) {
        const RateCell& c = report.cells[id];
        Json jc;
        jc["cell_id"] = id;
        jc["n"] = c.n;
        jc["p"] = c.p;
        jc["q"] = c.q;
        jc["s1"] = c.s1;
        jc["s2"] = c.s2;
        jc["lambda1"] = c.lambda1;
        jc["lambda2"] = c.lambda2;
        jc["replicates"] = c.replicates;
        jc["failed_replicates"] = c.failed_replicates;
        Json fails = Json::array();
        for (const auto& [rep, why] : c.failures) {
            fails.push_back({{"replicate", rep}, {"seed", c.seeds[rep]}, {"reason", why}});
        }
        jc["failures"] = fails;
        if (c.predictors) {
            jc["predictors"] = {{"smgm_omega", c.predictors->smgm_omega},
                                {"smgm_gamma", c.predictors->smgm_gamma},
                                {"heur_sigma", c.predictors->heur_sigma},
                                {"heur_psi", c.predictors->heur_psi}};
        } else {
            jc["predictors"] = nullptr;
        }
        Json summ = Json::object();
        for (const CellSummary& s : summarize_cell(c)) {
            summ[s.metric] = {{"mean", s.mean}, {"median", s.median}, {"count", s.count}};
        }
        jc["summary"] = summ;
        jcells.push_back(std::move(jc));
    }
    out["cells"] = jcells;

    bool slopes_ok = true;
    Json fits = Json::array();
    for (const SlopeFitEntry& f : report.slope_fits) {
        Json jf;
        jf["metric"] = f.metric;
        jf["axis"] = to_string(f.axis);
        jf["cells"] = f.cells;
        if (f.fit) {
            jf["slope"] = f.fit->slope;
            jf["intercept"] = f.fit->intercept;
            jf["r_squared"] = f.fit->r_squared;
        } else {
            jf["slope"] = nullptr;
            jf["intercept"] = nullptr;
            jf["r_squared"] = nullptr;
        }
        jf["predicted_slope"] = optional_json(f.predicted_slope);
        jf["verdict"] = f.verdict ? Json(*f.verdict) : Json(nullptr);
        if (!f.note.empty()) jf["note"] = f.note;
        if (f.verdict && !*f.verdict) slopes_ok = false;
        fits.push_back(std::move(jf));
    }
    out["slope_fits"] = fits;

    bool ratios_ok = true;
    Json ratios = Json::array();
    for (const RatioEntry& e : report.ratio_checks) {
        ratios.push_back({{"metric", e.metric},
                          {"axis", to_string(e.axis)},
                          {"cells", e.cells},
                          {"median_ratios", e.ratios},
                          {"predicted_ratios", e.predicted_ratios},
                          {"verdict", e.verdict}});
        ratios_ok = ratios_ok && e.verdict;
    }
    out["ratio_checks"] = ratios;
    if (r["self_test"].get<bool>()) {
        const SlopeFit st = synthetic_slope_selftest();
        out["self_test"] = {{"input", "errors = 3/n, n in {100, 200, 400}"},
                            {"slope", st.slope},
                            {"intercept", st.intercept},
                            {"r_squared", st.r_squared},
                            {"pass", std::abs(st.slope + 1.0) <= 1e-12}};
    }
    out["verdicts"] = {{"slopes", slopes_ok}, {"ratios", ratios_ok}};
    const std::string json_path = r["output_json"].get<std::string>();
    write_json_file(json_path, out);
    log << "wrote " << json_path << " and " << csv_path << '\n';
    return 0;
}

// ---- check-assumptions ----

Json resolve_check_assumptions(const Json& config) {
    const std::string ctx = "check-assumptions";
    const Json c = top_level(config, {"points", "schedule", "output"}, ctx);
    if (c.contains("points") == c.contains("schedule")) {
        config_error(ctx + ": give exactly one of 'points' or 'schedule'");
    }
    Json r;
    if (c.contains("points")) {
        const Json& pts = c.at("points");
        if (!pts.is_array() || pts.empty()) config_error(ctx + ".points: expected a non-empty array");
        Json out = Json::array();
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const std::string pctx = ctx + ".points[" + std::to_string(i) + "]";
            reject_unknown(pts[i], {"n", "p", "q", "s1", "s2", "lambda1", "lambda2"}, pctx);
            for (const char* k : {"n", "p", "q", "lambda1", "lambda2"}) {
                if (!pts[i].contains(k)) config_error(pctx + "." + k + ": required");
            }
            out.push_back({{"n", get_positive(pts[i], "n", 0, pctx)},
                           {"p", get_positive(pts[i], "p", 0, pctx)},
                           {"q", get_positive(pts[i], "q", 0, pctx)},
                           {"s1", get_nonneg(pts[i], "s1", 0, pctx)},
                           {"s2", get_nonneg(pts[i], "s2", 0, pctx)},
                           {"lambda1", get_positive(pts[i], "lambda1", 0, pctx)},
                           {"lambda2", get_positive(pts[i], "lambda2", 0, pctx)}});
        }
        r["points"] = out;
    } else {
        const std::string sctx = ctx + ".schedule";
        const Json& s = c.at("schedule");
        reject_unknown(s, {"n", "p", "q", "s1", "s2", "c0"}, sctx);
        for (const char* k : {"n", "p", "q"}) {
            if (!s.contains(k)) config_error(sctx + "." + k + ": required");
        }
        const auto n = get_uint_list(s, "n", {}, sctx, 1);
        const auto p = get_uint_list(s, "p", {}, sctx, 2);
        const auto q = get_uint_list(s, "q", {}, sctx, 2);
        if (p.size() != n.size() || q.size() != n.size()) {
            config_error(sctx + ": n, p and q lists must have equal length");
        }
        r["schedule"] = {{"n", n},
                         {"p", p},
                         {"q", q},
                         {"s1", get_uint(s, "s1", 0, sctx)},
                         {"s2", get_uint(s, "s2", 0, sctx)},
                         {"c0", get_positive(s, "c0", 1.0, sctx)}};
    }
    r["output"] = require_string(c, "output", ctx);
    return r;
}

int cmd_check_assumptions(const Json& config, std::ostream& log) {
    const Json r = resolve_check_assumptions(config);
    std::vector<AssumptionPoint> grid;
    if (r.contains("points")) {
        for (const Json& pt : r["points"]) {
            grid.push_back({pt["n"].get<double>(), pt["p"].get<double>(), pt["q"].get<double>(),
                            pt["s1"].get<double>(), pt["s2"].get<double>(),
                            pt["lambda1"].get<double>(), pt["lambda2"].get<double>()});
        }
    } else {
        const Json& s = r["schedule"];
        const auto n = s["n"].get<std::vector<std::size_t>>();
        const auto p = s["p"].get<std::vector<std::size_t>>();
        const auto q = s["q"].get<std::vector<std::size_t>>();
        const std::size_t s1 = s["s1"].get<std::size_t>();
        const std::size_t s2 = s["s2"].get<std::size_t>();
        for (std::size_t k = 0; k < n.size(); ++k) {
            const PenaltyConfig pen = lambda_schedule(n[k], p[k], q[k], s1, s2, s["c0"].get<double>());
            grid.push_back({static_cast<double>(n[k]), static_cast<double>(p[k]),
                            static_cast<double>(q[k]), static_cast<double>(s1),
                            static_cast<double>(s2), pen.lambda1, pen.lambda2});
        }
    }
    const AssumptionReport rep = check_assumptions(grid);

    Json out = header("check-assumptions", r);
    Json pts = Json::array();
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const AssumptionPoint& g = grid[k];
        const AssumptionValues& v = rep.values[k];
        pts.push_back({{"n", g.n},
                       {"p", g.p},
                       {"q", g.q},
                       {"s1", g.s1},
                       {"s2", g.s2},
                       {"lambda1", g.lambda1},
                       {"lambda2", g.lambda2},
                       {"a1_row", v.a1_row},
                       {"a1_col", v.a1_col},
                       {"a3_ratio1", v.a3_ratio1},
                       {"a3_ratio2", v.a3_ratio2},
                       {"a4_val1", v.a4_val1},
                       {"a4_val2", v.a4_val2},
                       {"r_n", v.r_n},
                       {"r_n_prime", v.r_n_prime},
                       {"r_n_equals_r_n_prime", v.r_n == v.r_n_prime},
                       {"a5_r_n", v.a5_r_n},
                       {"a5_r_n_prime", v.a5_r_n_prime},
                       {"h2_row", v.h2_row},
                       {"h2_col", v.h2_col}});
    }
    out["points"] = pts;
    Json verdicts = Json::object();
    for (const auto& [name, ok] : rep.verdicts) verdicts[name] = ok;
    out["verdicts"] = verdicts;
    out["verdict_rules"] = {
        {"decreasing", "a1_row, a1_col, a4_val1, a4_val2, h2_row, h2_col strictly decrease along the grid; a5 passes when r_n or r_n' times log(pq)/n strictly decreases"},
        {"bounded", "a3_ratio1, a3_ratio2 grow no faster than n^" + fmt17(kA3GrowthExponent) +
                        " between consecutive grid points"}};
    out["all_pass"] = rep.all_pass();
    const std::string path = r["output"].get<std::string>();
    write_json_file(path, out);
    log << "wrote " << path << (rep.all_pass() ? " (all verdicts pass)\n" : " (some verdicts fail)\n");
    return 0;
}

// ---- diagnose ----

Json resolve_diagnose(const Json& config) {
    const std::string ctx = "diagnose";
    const Json c = top_level(config,
                             {"dataset", "n", "p", "q", "seed", "model", "include_s", "s_cap",
                              "penalty", "decomposition", "output"},
                             ctx);
    Json r;
    if (c.contains("dataset")) {
        for (const char* k : {"n", "seed"}) {
            if (c.contains(k)) config_error(ctx + "." + k + ": not used when a dataset file is given");
        }
        r["dataset"] = require_string(c, "dataset", ctx);
        if (c.contains("p")) r["p"] = get_uint(c, "p", 0, ctx, 1);
        if (c.contains("q")) r["q"] = get_uint(c, "q", 0, ctx, 1);
    } else {
        r["n"] = get_uint(c, "n", 50, ctx, 1);
        r["p"] = get_uint(c, "p", 3, ctx, 1);
        r["q"] = get_uint(c, "q", 3, ctx, 1);
        r["seed"] = get_uint(c, "seed", 1, ctx);
    }
    r["model"] = resolve_model(object_or_empty(c, "model", ctx), ctx + ".model");
    r["include_s"] = get_bool(c, "include_s", true, ctx);
    r["s_cap"] = get_uint(c, "s_cap", kDefaultSCap, ctx, 1);
    r["penalty"] =
        resolve_penalty(object_or_empty(c, "penalty", ctx), ctx + ".penalty", true, "schedule");
    const Json d = object_or_empty(c, "decomposition", ctx);
    const std::string dctx = ctx + ".decomposition";
    reject_unknown(d, {"perturbations", "scale", "seed", "include_zero"}, dctx);
    const double scale = get_nonneg(d, "scale", 0.5, dctx);
    if (!(scale < 1.0)) config_error(dctx + ".scale: must be < 1 to keep perturbed matrices definite");
    r["decomposition"] = {{"perturbations", get_uint(d, "perturbations", 5, dctx)},
                          {"scale", scale},
                          {"seed", get_uint(d, "seed", 1, dctx)},
                          {"include_zero", get_bool(d, "include_zero", true, dctx)}};
    r["output"] = require_string(c, "output", ctx);
    return r;
}

namespace {

// Random symmetric direction with spectral norm scale * lambda_min(base).
SymMatrix perturbation(const SpdMatrix& base, double scale, std::uint64_t seed) {
    const std::size_t d = base.dim();
    NormalStream z(seed);
    Matrix e(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            const double v = z.next();
            e(i, j) = v;
            e(j, i) = v;
        }
    const double norm = spectral_norm(SymMatrix(e));
    if (norm == 0.0) return SymMatrix(Matrix(d, d));
    const double lmin = sym_eigenvalues(base.sym()).front();
    return SymMatrix(e * (scale * lmin / norm));
}

Json decomposition_row(const std::string& label, const DecompositionTerms& t) {
    return {{"label", label}, {"t1", t.t1},       {"t2", t.t2},
            {"t3", t.t3},     {"t4", t.t4},       {"t5", t.t5},
            {"t6", t.t6},     {"t7", t.t7},       {"sum", t.sum()},
            {"direct_difference", t.direct_difference}, {"residual", t.residual()}};
}

}  // namespace

int cmd_diagnose(const Json& config, std::ostream& log) {
    const Json r = resolve_diagnose(config);
    Dataset data;
    if (r.contains("dataset")) {
        data = load_dataset(r["dataset"].get<std::string>());
        if ((r.contains("p") && r["p"].get<std::size_t>() != data.p) ||
            (r.contains("q") && r["q"].get<std::size_t>() != data.q)) {
            config_error("diagnose: p/q in config differ from the dataset file");
        }
    }
    const std::size_t p = r.contains("dataset") ? data.p : r["p"].get<std::size_t>();
    const std::size_t q = r.contains("dataset") ? data.q : r["q"].get<std::size_t>();
    const TrueModel model = build_model(model_spec(r["model"], p, q));
    if (!r.contains("dataset")) {
        data = sample_matrix_normal(model, r["n"].get<std::size_t>(), r["seed"].get<std::uint64_t>());
    }

    Json out = header("diagnose", r);
    out["dataset"] = {{"n", data.n}, {"p", data.p}, {"q", data.q}, {"seed", data.seed}};
    out["model"] = {{"id", model.id}, {"s1", model.s1}, {"s2", model.s2}};

    int code = 0;
    const bool want_s = r["include_s"].get<bool>();
    const std::size_t cap = r["s_cap"].get<std::size_t>();
    OracleDiagnostics diag;
    Json oracle;
    try {
        diag = oracle_diagnostics(data, model, want_s, cap);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::DimensionCap) throw;
        diag = oracle_diagnostics(data, model, false, cap);
        oracle["s_error"] = {{"kind", "DimensionCap"}, {"message", e.what()}};
        log << "error: " << e.what() << '\n';
        code = 2;
    }
    oracle["dev_q1"] = diag.dev_q1;
    oracle["dev_q2"] = diag.dev_q2;
    oracle["dev_s"] = optional_json(diag.dev_s);
    oracle["scaled_dev_q1"] = optional_json(diag.scaled_dev_q1);
    oracle["scaled_dev_q2"] = optional_json(diag.scaled_dev_q2);
    oracle["scaled_dev_s"] = optional_json(diag.scaled_dev_s);
    out["oracle"] = oracle;

    const PenaltyConfig pen =
        penalty_for(r["penalty"], data.n, data.p, data.q, model.s1, model.s2);
    out["penalty_used"] = {{"lambda1", pen.lambda1}, {"lambda2", pen.lambda2}};
    const Json& dc = r["decomposition"];
    Json rows = Json::array();
    if (dc["include_zero"].get<bool>()) {
        rows.push_back(decomposition_row(
            "zero", decompose_objective_difference(data, model, SymMatrix(Matrix(p, p)),
                                                   SymMatrix(Matrix(q, q)), pen)));
    }
    const double scale = dc["scale"].get<double>();
    const std::uint64_t dseed = dc["seed"].get<std::uint64_t>();
    for (std::size_t k = 0; k < dc["perturbations"].get<std::size_t>(); ++k) {
        const SymMatrix d1 = perturbation(model.omega0, scale, derive_seed(dseed, {k, 1}));
        const SymMatrix d2 = perturbation(model.gamma0, scale, derive_seed(dseed, {k, 2}));
        rows.push_back(decomposition_row("random_" + std::to_string(k),
                                         decompose_objective_difference(data, model, d1, d2, pen)));
    }
    out["decomposition"] = rows;
    const std::string path = r["output"].get<std::string>();
    write_json_file(path, out);
    log << "wrote " << path << '\n';
    return code;
}

}  // namespace kronprec::cli
