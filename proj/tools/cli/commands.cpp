#include "commands.hpp"

#include "output.hpp"

#include "xeno/cores.hpp"
#include "xeno/diagnostics.hpp"
#include "xeno/error.hpp"
#include "xeno/numeric.hpp"
#include "xeno/orientation.hpp"
#include "xeno/structures.hpp"
#include "xeno/trajectory_model.hpp"
#include "xeno/xeno.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#ifndef XENO_VERSION
#define XENO_VERSION "0.0.0"
#endif

namespace xeno::cli {

namespace {

nlohmann::json read_json(const std::string& path, std::string_view what)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + std::string(what) + " file '" + path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed " + std::string(what) + " document '" + path + "': " + e.what());
    }
}

TrajectoryModel require_model(const RunConfig& cfg, std::size_t index = 0)
{
    if (cfg.models.size() <= index) throw ConfigError("--model is required");
    return load_model_file(cfg.models[index]);
}

System require_system(const RunConfig& cfg, const Alphabet& alphabet)
{
    if (cfg.system.empty()) throw ConfigError("--system is required");
    return load_system_file(cfg.system, alphabet);
}

ScoreConfig score_config(const RunConfig& cfg)
{
    if (cfg.config.empty()) return {};
    return load_score_config(read_json(cfg.config, "score config"));
}

ConstraintSystems constraints(const RunConfig& cfg, const Alphabet& alphabet)
{
    if (cfg.constraints.empty()) return {};
    return load_constraints(read_json(cfg.constraints, "constraints"), alphabet);
}

std::uint64_t require_seed(const RunConfig& cfg)
{
    if (!cfg.seed) throw ConfigError("--seed is required for sampling");
    return *cfg.seed;
}

double parse_number(std::string_view text)
{
    while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
    while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
    if (text == "inf" || text == "+inf") return std::numeric_limits<double>::infinity();
    if (text == "-inf") return -std::numeric_limits<double>::infinity();
    double x = 0.0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), x);
    if (ec != std::errc{} || end != text.data() + text.size() || text.empty())
        throw ConfigError("not a number: '" + std::string(text) + "'");
    return x;
}

std::vector<double> parse_list(std::string_view text)
{
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto end = comma == std::string_view::npos ? text.size() : comma;
        out.push_back(parse_number(text.substr(start, end - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

Format format_or(const RunConfig& cfg, Format fallback)
{
    return cfg.format.value_or(fallback);
}

std::string_view format_name(Format f)
{
    return f == Format::json ? "json" : "csv";
}

Json resolved_config(const RunConfig& cfg, Format format, const ScoreConfig* score)
{
    Json c;
    c["models"] = cfg.models;
    c["system"] = cfg.system.empty() ? Json() : Json(cfg.system);
    c["prompt"] = cfg.prompt;
    c["config"] = cfg.config.empty() ? Json() : Json(cfg.config);
    c["seed"] = cfg.seed ? Json(*cfg.seed) : Json();
    c["format"] = format_name(format);
    if (score) c["score"] = to_json(*score);
    return c;
}

Json header(std::string_view command, Json config)
{
    Json r;
    r["tool"] = {{"name", "xeno"}, {"version", XENO_VERSION}};
    r["command"] = command;
    r["config"] = std::move(config);
    return r;
}

std::string dump(const Json& j)
{
    return j.dump(2) + '\n';
}

Json name_groups(const Preorder& order, const System& system)
{
    Json out = Json::array();
    for (const auto& group : order.groups) {
        Json g = Json::array();
        for (std::size_t i : group) g.push_back(system[i].name());
        out.push_back(std::move(g));
    }
    return out;
}

std::string join_numbers(const std::vector<double>& xs, char sep)
{
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += sep;
        out += format_double(xs[i]);
    }
    return out;
}

Json stats_json(const DevianceStats& s)
{
    Json j;
    j["metric"] = to_string(s.metric);
    j["expected"] = number(s.expected);
    j["variance"] = number(s.variance);
    j["provenance"] = "exact";
    return j;
}

Json homogenization_side(const HomogenizationSide& s)
{
    Json j;
    j["core"] = numbers(s.core);
    j["expected_deviance"] = number(s.expected_deviance);
    j["deviance_variance"] = number(s.deviance_variance);
    j["core_entropy"] = s.core_entropy ? number(*s.core_entropy) : Json();
    return j;
}

} // namespace

// --- analyze --------------------------------------------------------------

CommandResult cmd_analyze(const RunConfig& cfg)
{
    WarningLog log;
    const auto model = require_model(cfg);
    const auto& alphabet = model.alphabet();
    const auto system = require_system(cfg, alphabet);
    const auto scfg = score_config(cfg);
    const auto prompt = parse_string(alphabet, cfg.prompt);
    const Format format = format_or(cfg, Format::json);

    const auto core = system_core(model, prompt, system);
    const auto support = continuation_support(model, prompt);
    const auto names = system.names();

    if (format == Format::csv) {
        std::ostringstream out;
        out << "trajectory,probability";
        for (const auto& n : names) out << ",compliance." << csv_field(n);
        for (const auto& n : names) out << ",orientation." << csv_field(n);
        out << ",deviance\n";
        for (const auto& y : support) {
            const auto lambda = evaluate_system(system, y.string).values;
            const auto theta = orientation(lambda, core.values).values;
            out << csv_field(format_string(alphabet, y.string)) << ',' << format_double(y.probability);
            for (double v : lambda) out << ',' << format_double(v);
            for (double v : theta) out << ',' << format_double(v);
            out << ',' << format_double(metric_norm(theta, scfg.metric)) << '\n';
        }
        return {out.str(), kExitOk};
    }

    Json config = resolved_config(cfg, format, &scfg);
    config["escort"] = cfg.escort;
    Json r = header("analyze", std::move(config));
    r["structures"] = names;
    r["support_size"] = support.size();

    Json c;
    c["values"] = numbers(core.values);
    c["provenance"] = "exact";
    c["prompt"] = format_string(alphabet, prompt);
    c["intervention"] = core.intervention;
    r["core"] = std::move(c);

    r["system_score"] = {{"aggregator", to_string(scfg.aggregator)},
                         {"value", number(system_score(core.values, scfg.aggregator))}};

    if (compensated_sum(core.values) > 0.0) {
        r["normalized_core"] = numbers(normalized_core(core));
        r["core_entropy"] = {{"base", to_string(scfg.entropy_base)},
                             {"value", number(core_entropy(core, scfg.entropy_base))}};
    } else {
        warn("degenerate core (all components zero): normalized core and entropy undefined");
        r["normalized_core"] = Json();
        r["core_entropy"] = Json();
    }
    r["ranking"] = {{"order", "ascending core"}, {"groups", name_groups(rank_structures(core), system)}};

    const auto stats = deviance_stats(model, prompt, system, scfg.metric);
    r["deviance"] = stats_json(stats);

    Json per = Json::array();
    for (std::size_t i = 0; i < system.size(); ++i) {
        const System single({system[i]});
        const auto s = deviance_stats(model, prompt, single, scfg.metric);
        Json j;
        j["name"] = system[i].name();
        j["kind"] = to_string(system[i].kind());
        j["core"] = number(core.values[i]);
        j["deviance"] = stats_json(s);
        per.push_back(std::move(j));
    }
    r["per_structure"] = std::move(per);

    if (!cfg.escort.empty()) {
        Json esc = Json::array();
        for (const auto& spec : cfg.escort) {
            const auto qr = parse_list(spec);
            if (qr.size() != 2) throw ConfigError("--escort expects 'q,r', got '" + spec + "'");
            std::vector<double> values;
            for (const auto& s : system.structures()) values.push_back(generalized_core(model, prompt, s, {qr[0], qr[1]}));
            esc.push_back({{"q", number(qr[0])}, {"r", number(qr[1])}, {"values", numbers(values)}});
        }
        r["escort"] = std::move(esc);
    }

    if (cfg.models.size() >= 2) {
        const auto after = require_model(cfg, 1);
        const auto h = homogenization_report(model, after, prompt, system, scfg.metric, scfg.entropy_base);
        Json j;
        j["before"] = homogenization_side(h.before);
        j["after"] = homogenization_side(h.after);
        j["delta_expected"] = number(h.delta_expected);
        j["delta_variance"] = number(h.delta_variance);
        j["delta_entropy"] = h.delta_entropy ? number(*h.delta_entropy) : Json();
        j["degenerate_core"] = h.degenerate_core;
        j["homogenizing"] = h.homogenizing;
        r["homogenization"] = std::move(j);
    }

    Json rows = Json::array();
    for (const auto& y : support) {
        const auto lambda = evaluate_system(system, y.string).values;
        const auto theta = orientation(lambda, core.values).values;
        Json row;
        row["trajectory"] = format_string(alphabet, y.string);
        row["probability"] = number(y.probability);
        row["compliance"] = numbers(lambda);
        row["orientation"] = numbers(theta);
        row["deviance"] = number(metric_norm(theta, scfg.metric));
        rows.push_back(std::move(row));
    }
    r["trajectories"] = std::move(rows);
    r["warnings"] = log.messages();
    return {dump(r), kExitOk};
}

// --- dynamics -------------------------------------------------------------

CommandResult cmd_dynamics(const RunConfig& cfg)
{
    WarningLog log;
    const auto model = require_model(cfg);
    const auto& alphabet = model.alphabet();
    const auto system = require_system(cfg, alphabet);
    if (cfg.trajectory.empty()) throw ConfigError("--trajectory is required");
    const auto prompt = parse_string(alphabet, cfg.prompt);
    const auto y = parse_string(alphabet, cfg.trajectory);
    const Format format = format_or(cfg, Format::csv);

    const auto trace = dynamics_trace(model, system, y, prompt);
    if (format == Format::csv) return {dynamics_csv(alphabet, system, trace), kExitOk};

    Json config = resolved_config(cfg, format, nullptr);
    config["trajectory"] = format_string(alphabet, y);
    Json r = header("dynamics", std::move(config));
    r["structures"] = system.names();
    Json steps = Json::array();
    for (const auto& s : trace) {
        Json j;
        j["step"] = s.step;
        j["token"] = alphabet.name(s.token);
        j["phi_x"] = numbers(s.core_state);
        j["phi_y"] = numbers(s.accumulated);
        j["phi_z"] = numbers(s.remaining);
        steps.push_back(std::move(j));
    }
    r["steps"] = std::move(steps);
    r["warnings"] = log.messages();
    return {dump(r), kExitOk};
}

// --- score ----------------------------------------------------------------

CommandResult cmd_score(const RunConfig& cfg)
{
    WarningLog log;
    const auto baseline = require_model(cfg);
    const auto& alphabet = baseline.alphabet();
    const auto system = require_system(cfg, alphabet);
    const auto scfg = score_config(cfg);
    const auto cons = constraints(cfg, alphabet);
    const auto prompt = parse_string(alphabet, cfg.prompt);
    if (cfg.candidates.empty()) throw ConfigError("--candidates is required");
    const Format format = format_or(cfg, Format::json);

    const auto spec = make_reward_spec(baseline, prompt, system, cons, scfg);
    const auto candidates = load_candidates_file(cfg.candidates, &spec);

    std::vector<ScoreBreakdown> rows;
    std::vector<double> rho_chi;
    for (const auto& w : candidates) {
        const auto model_w = apply_intervention(baseline, w);
        rows.push_back(score_intervention(model_w, baseline, prompt, system, cons, scfg));
        rho_chi.push_back(rows.back().rho_chi);
    }
    const auto pi = boltzmann_weights(rho_chi, scfg.beta_rho);
    std::optional<std::size_t> drawn;
    if (cfg.seed) drawn = sample_intervention_index(rho_chi, scfg.beta_rho, *cfg.seed);

    if (format == Format::csv) {
        std::ostringstream out;
        out << "name,intervention,score_explore,score_diverge,rho_d,score_even,score_inverted,rho_f,rho_c,rho_chi,"
               "pi\n";
        for (std::size_t k = 0; k < candidates.size(); ++k) {
            const auto& b = rows[k];
            out << csv_field(candidates[k].name) << ',' << csv_field(describe(candidates[k])) << ','
                << format_double(b.score_explore) << ',' << format_double(b.score_diverge) << ','
                << format_double(b.rho_d) << ',' << (b.score_even ? format_double(*b.score_even) : "") << ','
                << format_double(b.score_inverted) << ',' << format_double(b.rho_f) << ','
                << format_double(b.rho_c) << ',' << format_double(b.rho_chi) << ',' << format_double(pi[k]) << '\n';
        }
        return {out.str(), kExitOk};
    }

    Json config = resolved_config(cfg, format, &scfg);
    config["candidates"] = cfg.candidates;
    config["constraints"] = cfg.constraints.empty() ? Json() : Json(cfg.constraints);
    Json r = header("score", std::move(config));
    r["structures"] = system.names();
    r["baseline_core"] = numbers(spec.core);

    Json list = Json::array();
    for (std::size_t k = 0; k < candidates.size(); ++k) {
        const auto& b = rows[k];
        Json j;
        j["name"] = candidates[k].name;
        j["intervention"] = describe(candidates[k]);
        j["core"] = numbers(b.core_w.values);
        j["deviance"] = stats_json(b.stats);
        j["score_explore"] = number(b.score_explore);
        j["score_diverge"] = number(b.score_diverge);
        j["rho_d"] = number(b.rho_d);
        j["score_even"] = b.score_even ? number(*b.score_even) : Json();
        j["score_inverted"] = number(b.score_inverted);
        j["rho_f"] = number(b.rho_f);
        j["rho_c"] = number(b.rho_c);
        j["rho_chi"] = number(b.rho_chi);
        j["pi"] = number(pi[k]);
        j["warnings"] = b.warnings;
        list.push_back(std::move(j));
    }
    r["candidates"] = std::move(list);
    r["boltzmann"] = {{"beta_rho", number(scfg.beta_rho)}, {"weights", numbers(pi)}};
    if (drawn) {
        r["draw"] = {{"seed", *cfg.seed}, {"index", *drawn}, {"name", candidates[*drawn].name}};
    } else {
        r["draw"] = Json();
    }
    r["warnings"] = log.messages();
    return {dump(r), kExitOk};
}

// --- sample ---------------------------------------------------------------

CommandResult cmd_sample(const RunConfig& cfg)
{
    WarningLog log;
    const auto model = require_model(cfg);
    const auto& alphabet = model.alphabet();
    const auto system = require_system(cfg, alphabet);
    const auto scfg = score_config(cfg);
    const auto cons = constraints(cfg, alphabet);
    const auto prompt = parse_string(alphabet, cfg.prompt);
    const auto seed = require_seed(cfg);
    const Format format = format_or(cfg, Format::json);
    const double beta = scfg.beta_r;

    const auto spec = make_reward_spec(model, prompt, system, cons, scfg);
    std::map<TokenString, TrajectoryRewards> cache;
    auto rewards_of = [&](const TokenString& y) -> const TrajectoryRewards& {
        auto it = cache.find(y);
        if (it == cache.end()) it = cache.emplace(y, trajectory_rewards(y, spec)).first;
        return it->second;
    };
    auto stay = [&](const TrajectoryRewards& t) {
        return scfg.lambda_d * t.deviance + scfg.lambda_f * t.fairness + scfg.lambda_c * t.constraint;
    };

    std::vector<TokenString> draws;
    std::vector<double> weights;
    std::vector<TiltedTrajectory> exact;
    std::optional<double> ess;
    if (cfg.importance) {
        if (cfg.count > 0) {
            auto is = tilted_importance_sample(
                model, prompt, [&](const TokenString& y) { return stay(rewards_of(y)); }, beta, cfg.count, seed);
            draws = std::move(is.draws);
            weights = std::move(is.weights);
            ess = is.effective_sample_size;
        }
    } else {
        exact = tilted_distribution(model, spec, beta);
        std::vector<double> probs;
        for (const auto& t : exact) probs.push_back(t.probability);
        for (std::size_t i : sample_categorical(probs, seed, cfg.count)) draws.push_back(exact[i].string);
    }

    if (format == Format::csv) {
        std::ostringstream out;
        out << "index,trajectory,r_d,r_f,r_c,reward" << (cfg.importance ? ",weight" : "") << '\n';
        for (std::size_t i = 0; i < draws.size(); ++i) {
            const auto& t = rewards_of(draws[i]);
            out << i << ',' << csv_field(format_string(alphabet, draws[i])) << ',' << format_double(t.deviance) << ','
                << format_double(t.fairness) << ',' << format_double(t.constraint) << ',' << format_double(stay(t));
            if (cfg.importance) out << ',' << format_double(weights[i]);
            out << '\n';
        }
        return {out.str(), kExitOk};
    }

    Json config = resolved_config(cfg, format, &scfg);
    config["constraints"] = cfg.constraints.empty() ? Json() : Json(cfg.constraints);
    config["count"] = cfg.count;
    config["importance"] = cfg.importance;
    Json r = header("sample", std::move(config));
    r["beta_r"] = number(beta);
    r["mode"] = cfg.importance ? "importance" : "exact";

    if (!cfg.importance) {
        Json dist = Json::array();
        for (const auto& t : exact) {
            dist.push_back({{"trajectory", format_string(alphabet, t.string)},
                            {"baseline_probability", number(t.baseline_probability)},
                            {"reward", number(t.reward)},
                            {"probability", number(t.probability)}});
        }
        r["distribution"] = std::move(dist);
    } else {
        r["effective_sample_size"] = ess ? number(*ess) : Json();
    }

    std::map<TokenString, std::size_t> freq;
    for (const auto& y : draws) ++freq[y];
    Json f = Json::array();
    for (const auto& [y, n] : freq) f.push_back({{"trajectory", format_string(alphabet, y)}, {"count", n}});
    r["frequencies"] = std::move(f);

    Json list = Json::array();
    for (std::size_t i = 0; i < draws.size(); ++i) {
        const auto& t = rewards_of(draws[i]);
        Json j;
        j["trajectory"] = format_string(alphabet, draws[i]);
        j["r_d"] = number(t.deviance);
        j["r_f"] = number(t.fairness);
        j["r_c"] = number(t.constraint);
        j["reward"] = number(stay(t));
        if (cfg.importance) j["weight"] = number(weights[i]);
        list.push_back(std::move(j));
    }
    r["draws"] = std::move(list);
    r["warnings"] = log.messages();
    return {dump(r), kExitOk};
}

// --- pareto ---------------------------------------------------------------

namespace {

Json pareto_candidate(const ParetoCandidate& c)
{
    Json j;
    j["core"] = numbers(c.core);
    j["score_explore"] = number(c.score_explore);
    j["score_diverge"] = number(c.score_diverge);
    j["rho_d"] = number(c.rho_d);
    j["score_even"] = number(c.score_even);
    j["score_inverted"] = number(c.score_inverted);
    j["rho_f"] = number(c.rho_f);
    return j;
}

} // namespace

CommandResult cmd_pareto(const RunConfig& cfg)
{
    const auto baseline = parse_list(cfg.pareto_baseline);
    if (cfg.pareto_n < 2) throw ConfigError("pareto needs n >= 2");
    if (baseline.size() != cfg.pareto_n)
        throw ConfigError("baseline has " + std::to_string(baseline.size()) + " components, expected " +
                          std::to_string(cfg.pareto_n));
    const Format format = format_or(cfg, Format::json);

    const auto rep = pareto_demo(baseline);
    const bool ok = rep.diversity_wins_rho_d && rep.fairness_wins_rho_f && rep.non_dominance;
    const int code = ok ? kExitOk : kExitIdentity;

    if (format == Format::csv) {
        std::ostringstream out;
        out << "candidate,core,score_explore,score_diverge,rho_d,score_even,score_inverted,rho_f\n";
        auto row = [&](std::string_view name, const ParetoCandidate& c) {
            out << name << ',' << join_numbers(c.core, ' ') << ',' << format_double(c.score_explore) << ','
                << format_double(c.score_diverge) << ',' << format_double(c.rho_d) << ','
                << format_double(c.score_even) << ',' << format_double(c.score_inverted) << ','
                << format_double(c.rho_f) << '\n';
        };
        row("diversity_optimal", rep.diversity_optimal);
        row("fairness_optimal", rep.fairness_optimal);
        return {out.str(), code};
    }

    Json config = resolved_config(cfg, format, nullptr);
    config["n"] = cfg.pareto_n;
    config["baseline"] = numbers(baseline);
    Json r = header("pareto", std::move(config));
    r["conventions"] = rep.conventions;
    r["diversity_optimal"] = pareto_candidate(rep.diversity_optimal);
    r["fairness_optimal"] = pareto_candidate(rep.fairness_optimal);
    r["checks"] = {{"baseline_strictly_decreasing", rep.baseline_strictly_decreasing},
                   {"diversity_wins_rho_d", rep.diversity_wins_rho_d},
                   {"fairness_wins_rho_f", rep.fairness_wins_rho_f},
                   {"non_dominance", rep.non_dominance}};
    r["passed"] = ok;
    return {dump(r), code};
}

} // namespace xeno::cli
