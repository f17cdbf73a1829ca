#include "commands.hpp"
#include "output.hpp"

#include "xeno/error.hpp"

#include <CLI11.hpp>

#include <iostream>

#ifndef XENO_VERSION
#define XENO_VERSION "0.0.0"
#endif

using namespace xeno::cli;

namespace {

void common_flags(CLI::App* cmd, RunConfig& cfg, std::string& format, bool sampling)
{
    cmd->add_option("--model", cfg.models, "model document(s)");
    cmd->add_option("--system", cfg.system, "system document");
    cmd->add_option("--prompt", cfg.prompt, "prompt as whitespace-separated tokens");
    cmd->add_option("--config", cfg.config, "score config overrides (JSON)");
    cmd->add_option("--seed", cfg.seed, sampling ? "RNG seed (required)" : "RNG seed");
    cmd->add_option("--out", cfg.out, "output path (default stdout)");
    cmd->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
}

int emit(const RunConfig& cfg, const CommandResult& result)
{
    if (cfg.out.empty()) {
        std::cout << result.output << std::flush;
    } else {
        write_atomic(cfg.out, result.output);
    }
    return result.exit_code;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Structure-aware diversity analysis of finite string generators", "xeno"};
    app.set_version_flag("--version", std::string("xeno ") + XENO_VERSION);
    app.require_subcommand(1);

    RunConfig cfg;
    std::string format;

    auto* analyze = app.add_subcommand("analyze", "cores, deviance statistics and per-trajectory table");
    common_flags(analyze, cfg, format, false);
    analyze->add_option("--escort", cfg.escort, "generalized core at 'q,r' (repeatable)");

    auto* dynamics = app.add_subcommand("dynamics", "per-step dynamics along one trajectory (CSV)");
    common_flags(dynamics, cfg, format, false);
    dynamics->add_option("--trajectory", cfg.trajectory, "terminal trajectory, e.g. 'b <eos>'");

    auto* score = app.add_subcommand("score", "score intervention candidates against a baseline");
    common_flags(score, cfg, format, false);
    score->add_option("--candidates", cfg.candidates, "candidates document");
    score->add_option("--constraints", cfg.constraints, "constraint systems document");

    auto* sample = app.add_subcommand("sample", "draw trajectories from the reward-tilted distribution");
    common_flags(sample, cfg, format, true);
    sample->add_option("--count", cfg.count, "number of draws");
    sample->add_option("--constraints", cfg.constraints, "constraint systems document");
    sample->add_flag("--importance", cfg.importance, "self-normalized importance sampling instead of exact tilt");

    auto* pareto = app.add_subcommand("pareto", "diversity/fairness trade-off demonstration");
    common_flags(pareto, cfg, format, false);
    pareto->add_option("n", cfg.pareto_n, "number of structures")->required();
    pareto->add_option("baseline", cfg.pareto_baseline, "baseline core, comma separated")->required();

    auto* verify = app.add_subcommand("verify", "run the oracle identity suite");
    common_flags(verify, cfg, format, false);
    verify->add_option("--trees", cfg.random_trees, "random trees per property");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }
    if (format == "json") cfg.format = Format::json;
    if (format == "csv") cfg.format = Format::csv;

    try {
        if (*analyze) return emit(cfg, cmd_analyze(cfg));
        if (*dynamics) return emit(cfg, cmd_dynamics(cfg));
        if (*score) return emit(cfg, cmd_score(cfg));
        if (*sample) return emit(cfg, cmd_sample(cfg));
        if (*pareto) return emit(cfg, cmd_pareto(cfg));
        if (*verify) return emit(cfg, cmd_verify(cfg));
    } catch (const xeno::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const xeno::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
    return kExitConfig;
}
