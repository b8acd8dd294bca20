#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kronprec/commands.hpp"
#include "kronprec/error.hpp"

using kronprec::cli::Json;

namespace {

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string output;
    std::string seed;
};

void add_common(CLI::App* cmd, Common& c, bool with_seed) {
    cmd->add_option("-c,--config", c.config_path, "JSON config file");
    cmd->add_option("--set", c.overrides, "override a config key, e.g. --set model.tau1=0.4")
        ->take_all();
    cmd->add_option("-o,--output", c.output, "output path (same as --set output=...)");
    if (with_seed) cmd->add_option("--seed", c.seed, "seed (same as --set seed=...)");
}

Json assemble(const Common& c) {
    Json cfg = c.config_path.empty() ? Json::object() : kronprec::cli::load_config_file(c.config_path);
    if (!c.output.empty()) cfg["output"] = c.output;
    if (!c.seed.empty()) kronprec::cli::apply_override(cfg, "seed=" + c.seed);
    for (const std::string& o : c.overrides) kronprec::cli::apply_override(cfg, o);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kronprec: sparse and heuristic Kronecker covariance estimation"};
    app.require_subcommand(1);

    Common sim, fit, sweep, check, diag;
    std::string csv_out;
    std::string workers;
    CLI::App* c_sim = app.add_subcommand("simulate", "draw a matrix-normal dataset");
    add_common(c_sim, sim, true);
    CLI::App* c_fit = app.add_subcommand("fit", "fit smgm or heuristic estimators to a dataset");
    add_common(c_fit, fit, false);
    CLI::App* c_sweep = app.add_subcommand("rate-sweep", "Monte-Carlo convergence-rate sweep");
    add_common(c_sweep, sweep, true);
    c_sweep->add_option("--csv", csv_out, "per-replicate CSV path (same as --set output_csv=...)");
    c_sweep->add_option("--workers", workers, "worker threads (0: KRONPREC_WORKERS or all cores)");
    CLI::App* c_check = app.add_subcommand("check-assumptions", "evaluate growth and tuning conditions");
    add_common(c_check, check, false);
    CLI::App* c_diag = app.add_subcommand("diagnose", "oracle deviations and objective decomposition");
    add_common(c_diag, diag, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (c_sim->parsed()) return kronprec::cli::cmd_simulate(assemble(sim), std::cerr);
        if (c_fit->parsed()) return kronprec::cli::cmd_fit(assemble(fit), std::cerr);
        if (c_sweep->parsed()) {
            // -o names the JSON report for this command.
            Common s = sweep;
            s.output.clear();
            Json cfg = assemble(s);
            if (!sweep.output.empty()) cfg["output_json"] = sweep.output;
            if (!csv_out.empty()) cfg["output_csv"] = csv_out;
            if (!workers.empty()) kronprec::cli::apply_override(cfg, "workers=" + workers);
            return kronprec::cli::cmd_rate_sweep(cfg, std::cerr);
        }
        if (c_check->parsed()) return kronprec::cli::cmd_check_assumptions(assemble(check), std::cerr);
        if (c_diag->parsed()) return kronprec::cli::cmd_diagnose(assemble(diag), std::cerr);
    } catch (const kronprec::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.is_numerical() ? 1 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}
