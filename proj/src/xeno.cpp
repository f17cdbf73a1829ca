#include "xeno/xeno.hpp"

#include "xeno/diagnostics.hpp"
#include "xeno/error.hpp"
#include "xeno/numeric.hpp"
#include "xeno/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace xeno {

// --- configuration --------------------------------------------------------

namespace {

struct WeightField {
    const char* key;
    double ScoreConfig::*member;
};

constexpr WeightField kWeightFields[] = {
    {"lambda_E", &ScoreConfig::lambda_E},   {"lambda_Var", &ScoreConfig::lambda_Var},
    {"lambda_d0", &ScoreConfig::lambda_d0}, {"lambda_d1", &ScoreConfig::lambda_d1},
    {"lambda_f0", &ScoreConfig::lambda_f0}, {"lambda_f1", &ScoreConfig::lambda_f1},
    {"lambda_c0", &ScoreConfig::lambda_c0}, {"lambda_c1", &ScoreConfig::lambda_c1},
    {"lambda_c2", &ScoreConfig::lambda_c2}, {"lambda_d", &ScoreConfig::lambda_d},
    {"lambda_f", &ScoreConfig::lambda_f},   {"lambda_c", &ScoreConfig::lambda_c},
    {"beta_rho", &ScoreConfig::beta_rho},   {"beta_r", &ScoreConfig::beta_r},
};

} // namespace

void ScoreConfig::validate() const
{
    for (const auto& f : kWeightFields) {
        const double v = this->*f.member;
        if (!(v >= 0.0)) throw ValidationError(std::string(f.key) + " must be >= 0");
        if (std::isinf(v) && std::string_view(f.key).starts_with("lambda"))
            throw ValidationError(std::string(f.key) + " must be finite");
    }
}

ScoreConfig load_score_config(const nlohmann::json& doc, ScoreConfig cfg)
{
    if (!doc.is_object()) throw ConfigError("score config must be an object");
    try {
        for (const auto& [key, value] : doc.items()) {
            bool matched = false;
            for (const auto& f : kWeightFields) {
                if (key == f.key) {
                    if (value.is_string() && value.get<std::string>() == "inf") {
                        cfg.*f.member = std::numeric_limits<double>::infinity();
                    } else {
                        cfg.*f.member = value.get<double>();
                    }
                    matched = true;
                }
            }
            if (matched) continue;
            if (key == "aggregator") {
                cfg.aggregator = parse_aggregator(value.get<std::string>());
            } else if (key == "metric") {
                cfg.metric = parse_diff_metric(value.get<std::string>());
            } else if (key == "entropy_base") {
                cfg.entropy_base = parse_log_base(value.is_string() ? value.get<std::string>()
                                                                    : format_double(value.get<double>()));
            } else {
                throw ConfigError("unknown score config key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed score config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

nlohmann::ordered_json to_json(const ScoreConfig& cfg)
{
    nlohmann::ordered_json out;
    for (const auto& f : kWeightFields) {
        const double v = cfg.*f.member;
        if (std::isfinite(v)) {
            out[f.key] = v;
        } else {
            out[f.key] = format_double(v);
        }
    }
    out["aggregator"] = to_string(cfg.aggregator);
    out["metric"] = std::string(to_string(cfg.metric));
    out["entropy_base"] = std::string(to_string(cfg.entropy_base));
    return out;
}

void ConstraintSystems::validate() const
{
    std::set<std::string> seen;
    for (const auto* role : {&target, &avoid, &conserve}) {
        if (!*role) continue;
        for (const auto& name : (*role)->names()) {
            if (!seen.insert(name).second)
                throw ValidationError("structure '" + name + "' appears in more than one constraint role");
        }
    }
}

ConstraintSystems load_constraints(const nlohmann::json& doc, const Alphabet& alphabet)
{
    if (!doc.is_object()) throw ConfigError("constraint document must be an object");
    ConstraintSystems cs;
    for (const auto& [key, value] : doc.items()) {
        std::optional<System>* role = nullptr;
        if (key == "target") role = &cs.target;
        else if (key == "avoid") role = &cs.avoid;
        else if (key == "conserve") role = &cs.conserve;
        else throw ConfigError("unknown constraint role '" + key + "'");
        if (value.is_array() && value.empty()) continue;
        *role = load_system(value, alphabet);
    }
    cs.validate();
    return cs;
}

// --- distribution level ---------------------------------------------------

double score_explore(const CoreVector& core_w, const CoreVector& core_w0, DiffMetric m)
{
    return difference_score(core_w.values, core_w0.values, m);
}

double score_diverge(const DevianceStats& stats, const ScoreConfig& cfg)
{
    return cfg.lambda_E * stats.expected + cfg.lambda_Var * stats.variance;
}

int relative_order_sign(std::span<const double> core, std::size_t i, std::size_t j)
{
    if (i == j) throw DomainError("relative order needs two distinct structures");
    if (i >= core.size() || j >= core.size()) throw DomainError("structure index out of range");
    const double d = core[i] - core[j];
    return (d > 0.0) - (d < 0.0);
}

double score_inverted(std::span<const double> core_w, std::span<const double> core_w0)
{
    if (core_w.size() != core_w0.size()) throw DomainError("dimension mismatch in score_inverted");
    const std::size_t n = core_w.size();
    if (n < 2) throw DomainError("score_inverted needs at least two structures");
    std::size_t changed = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (relative_order_sign(core_w, i, j) != relative_order_sign(core_w0, i, j)) ++changed;
        }
    }
    return static_cast<double>(changed) / static_cast<double>(n * (n - 1) / 2);
}

double score_inverted(const CoreVector& core_w, const CoreVector& core_w0)
{
    return score_inverted(core_w.values, core_w0.values);
}

namespace {

void note(ScoreBreakdown& b, std::string message)
{
    warn(message);
    b.warnings.push_back(std::move(message));
}

} // namespace

ScoreBreakdown score_intervention(const TrajectoryModel& model_w, const TrajectoryModel& model_w0,
                                  const TokenString& prompt, const System& system,
                                  const ConstraintSystems& constraints, const ScoreConfig& cfg)
{
    cfg.validate();
    ScoreBreakdown b;
    b.core_w = system_core(model_w, prompt, system, "w");
    b.core_w0 = system_core(model_w0, prompt, system, "w0");
    b.stats = deviance_stats(model_w, prompt, system, cfg.metric);

    b.score_explore = score_explore(b.core_w, b.core_w0, cfg.metric);
    b.score_diverge = score_diverge(b.stats, cfg);
    b.rho_d = cfg.lambda_d0 * b.score_explore + cfg.lambda_d1 * b.score_diverge;

    if (compensated_sum(b.core_w.values) > 0.0) {
        b.score_even = core_entropy(b.core_w, cfg.entropy_base);
    } else {
        note(b, "degenerate core (all components zero): evenness term omitted");
    }
    if (system.size() >= 2) {
        b.score_inverted = score_inverted(b.core_w, b.core_w0);
    } else if (cfg.lambda_f1 > 0.0) {
        note(b, "single-structure system: invertedness undefined, term omitted");
    }
    b.rho_f = cfg.lambda_f0 * b.score_even.value_or(0.0) + cfg.lambda_f1 * b.score_inverted;

    if (constraints.empty()) {
        if (cfg.lambda_c > 0.0) note(b, "lambda_c > 0 but no constraint systems given: rho_c = 0");
    } else {
        b.rho_c = constraint_score(model_w, model_w0, prompt, constraints, cfg);
    }
    b.rho_chi = cfg.lambda_d * b.rho_d + cfg.lambda_f * b.rho_f + cfg.lambda_c * b.rho_c;
    return b;
}

double diversity_score(const TrajectoryModel& model_w, const TrajectoryModel& model_w0, const TokenString& prompt,
                       const System& system, const ScoreConfig& cfg)
{
    const auto core_w = system_core(model_w, prompt, system);
    const auto core_w0 = system_core(model_w0, prompt, system);
    const auto stats = deviance_stats(model_w, prompt, system, cfg.metric);
    return cfg.lambda_d0 * score_explore(core_w, core_w0, cfg.metric) + cfg.lambda_d1 * score_diverge(stats, cfg);
}

double fairness_score(const TrajectoryModel& model_w, const TrajectoryModel& model_w0, const TokenString& prompt,
                      const System& system, const ScoreConfig& cfg)
{
    ConstraintSystems none;
    ScoreConfig c = cfg;
    c.lambda_c = 0.0;
    return score_intervention(model_w, model_w0, prompt, system, none, c).rho_f;
}

double constraint_score(const TrajectoryModel& model_w, const TrajectoryModel& model_w0, const TokenString& prompt,
                        const ConstraintSystems& constraints, const ScoreConfig& cfg)
{
    constraints.validate();
    double rho = 0.0;
    if (constraints.target)
        rho += cfg.lambda_c0 * system_score(system_core(model_w, prompt, *constraints.target).values, cfg.aggregator);
    if (constraints.avoid)
        rho -= cfg.lambda_c1 * system_score(system_core(model_w, prompt, *constraints.avoid).values, cfg.aggregator);
    if (constraints.conserve) {
        const auto w = system_core(model_w, prompt, *constraints.conserve);
        const auto w0 = system_core(model_w0, prompt, *constraints.conserve);
        rho -= cfg.lambda_c2 * difference_score(w.values, w0.values, cfg.metric);
    }
    return rho;
}

double intervention_score(const TrajectoryModel& model_w, const TrajectoryModel& model_w0, const TokenString& prompt,
                          const System& system, const ConstraintSystems& constraints, const ScoreConfig& cfg)
{
    return score_intervention(model_w, model_w0, prompt, system, constraints, cfg).rho_chi;
}

std::vector<double> boltzmann_weights(std::span<const double> scores, double beta)
{
    if (scores.empty()) throw DomainError("no candidates to weigh");
    if (!(beta >= 0.0)) throw DomainError("beta must be >= 0");
    for (double s : scores) {
        if (!std::isfinite(s)) throw DomainError("candidate scores must be finite");
    }
    const double top = *std::max_element(scores.begin(), scores.end());
    std::vector<double> w(scores.size());
    if (std::isinf(beta)) {
        for (std::size_t i = 0; i < scores.size(); ++i) w[i] = scores[i] == top ? 1.0 : 0.0;
    } else {
        for (std::size_t i = 0; i < scores.size(); ++i) w[i] = std::exp(beta * (scores[i] - top));
    }
    const double z = compensated_sum(w);
    for (double& x : w) x /= z;
    return w;
}

std::vector<std::size_t> sample_categorical(std::span<const double> probabilities, std::uint64_t seed,
                                            std::size_t count)
{
    if (probabilities.empty()) throw DomainError("cannot sample from an empty distribution");
    std::vector<std::size_t> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        Rng rng(derive_seed(seed, k));
        const double u = rng.uniform();
        double acc = 0.0;
        std::size_t pick = probabilities.size();
        std::size_t last_positive = 0;
        for (std::size_t i = 0; i < probabilities.size(); ++i) {
            if (probabilities[i] <= 0.0) continue;
            last_positive = i;
            acc += probabilities[i];
            if (u < acc) {
                pick = i;
                break;
            }
        }
        out.push_back(pick == probabilities.size() ? last_positive : pick);
    }
    return out;
}

std::size_t sample_intervention_index(std::span<const double> scores, double beta, std::uint64_t seed)
{
    const auto w = boltzmann_weights(scores, beta);
    return sample_categorical(w, seed, 1).front();
}

const Intervention& sample_intervention(std::span<const Intervention> candidates, std::span<const double> scores,
                                        double beta, std::uint64_t seed)
{
    if (candidates.empty()) throw DomainError("no candidate interventions");
    if (candidates.size() != scores.size()) throw DomainError("one score per candidate is required");
    return candidates[sample_intervention_index(scores, beta, seed)];
}

std::vector<WeightedString> mixture_distribution(std::span<const TrajectoryModel> models,
                                                 std::span<const double> weights, const TokenString& prompt)
{
    if (models.empty() || models.size() != weights.size())
        throw DomainError("mixture needs one weight per candidate model");
    for (double w : weights) {
        if (!(w >= 0.0)) throw DomainError("mixture weights must be non-negative");
    }
    if (std::abs(compensated_sum(weights) - 1.0) > 1e-9) throw DomainError("mixture weights are not normalized");

    std::map<TokenString, CompensatedSum> acc;
    for (std::size_t k = 0; k < models.size(); ++k) {
        if (weights[k] == 0.0) continue;
        for (const auto& y : enumerate_trajectories(models[k], prompt)) acc[y.string].add(weights[k] * y.probability);
    }
    std::vector<WeightedString> out;
    out.reserve(acc.size());
    for (const auto& [s, p] : acc) out.push_back({s, p.value()});
    return out;
}

// --- trajectory level -----------------------------------------------------

std::vector<double> fairness_weights(std::span<const double> core, double eps)
{
    if (core.empty()) throw DomainError("fairness weights need a non-empty core");
    std::vector<double> v;
    v.reserve(core.size());
    for (double c : core) v.push_back(1.0 / (c + eps));
    const double z = compensated_sum(v);
    for (double& x : v) x /= z;
    return v;
}

RewardSpec make_reward_spec(const TrajectoryModel& baseline, const TokenString& prompt, System system,
                            ConstraintSystems constraints, const ScoreConfig& cfg)
{
    cfg.validate();
    constraints.validate();
    RewardSpec spec{std::move(system), std::move(constraints), prompt, cfg, {}, {}, {}};
    spec.core = system_core(baseline, prompt, spec.system).values;
    if (spec.constraints.conserve)
        spec.conserve_core = system_core(baseline, prompt, *spec.constraints.conserve).values;
    spec.weights = fairness_weights(spec.core);
    return spec;
}

TrajectoryRewards trajectory_rewards(const TokenString& y, const RewardSpec& spec)
{
    if (!y.terminal()) throw DomainError("rewards are defined on terminal trajectories");
    if (!spec.prompt.is_prefix_of(y)) throw DomainError("trajectory does not extend the reward prompt");

    const auto lambda = evaluate_system(spec.system, y);
    TrajectoryRewards r{};
    r.deviance = metric_norm(orientation(lambda.values, spec.core).values, spec.config.metric);

    CompensatedSum fair;
    for (std::size_t i = 0; i < lambda.values.size(); ++i) fair.add(spec.weights[i] * lambda.values[i]);
    r.fairness = fair.value();

    CompensatedSum c;
    if (spec.constraints.target) {
        for (const auto& s : spec.constraints.target->structures()) c.add(s.evaluate(y));
    }
    if (spec.constraints.avoid) {
        for (const auto& s : spec.constraints.avoid->structures()) c.add(-s.evaluate(y));
    }
    if (spec.constraints.conserve) {
        const auto& cons = *spec.constraints.conserve;
        for (std::size_t i = 0; i < cons.size(); ++i) c.add(-std::abs(cons[i].evaluate(y) - spec.conserve_core[i]));
    }
    r.constraint = c.value();
    return r;
}

double stay_reward(const TokenString& y, const RewardSpec& spec)
{
    const auto r = trajectory_rewards(y, spec);
    const auto& cfg = spec.config;
    return cfg.lambda_d * r.deviance + cfg.lambda_f * r.fairness + cfg.lambda_c * r.constraint;
}

RewardTilt make_reward_tilt(const RewardSpec& spec, double beta, std::string name)
{
    auto shared = std::make_shared<const RewardSpec>(spec);
    return RewardTilt{std::move(name), spec.prompt, [shared](const TokenString& y) { return stay_reward(y, *shared); },
                      beta};
}

namespace {

std::vector<std::string> prompt_tokens(const nlohmann::json& v)
{
    if (v.is_string()) {
        std::vector<std::string> out;
        std::istringstream in(v.get<std::string>());
        for (std::string t; in >> t;) out.push_back(t);
        return out;
    }
    return v.get<std::vector<std::string>>();
}

Transform load_transform(const nlohmann::json& t, const RewardSpec* spec)
{
    if (!t.is_object()) throw ConfigError("transform must be an object");
    const auto type = t.at("type").get<std::string>();
    if (type == "prepend_prompt") return PrependPrompt{prompt_tokens(t.at("tokens"))};
    if (type == "temperature") return Temperature{t.at("tau").get<double>()};
    if (type == "token_bias") return TokenBias{t.at("bias").get<std::map<std::string, double>>()};
    if (type == "reward_tilt") {
        if (!spec) throw ConfigError("reward_tilt needs a system to build the stay reward from");
        return make_reward_tilt(*spec, t.at("beta").get<double>());
    }
    throw ConfigError("unknown transform type '" + type + "'");
}

} // namespace

std::vector<Intervention> load_candidates(const nlohmann::json& doc, const RewardSpec* spec)
{
    if (!doc.is_array()) throw ConfigError("candidates document must be an array");
    if (doc.empty()) throw ConfigError("candidates document is empty");
    std::vector<Intervention> out;
    std::set<std::string> names;
    try {
        for (const auto& entry : doc) {
            if (!entry.is_object()) throw ConfigError("candidate must be an object");
            Intervention w;
            w.name = entry.at("name").get<std::string>();
            if (!names.insert(w.name).second) throw ConfigError("duplicate candidate name '" + w.name + "'");
            if (entry.contains("transforms")) {
                for (const auto& t : entry.at("transforms")) w.transforms.push_back(load_transform(t, spec));
            }
            out.push_back(std::move(w));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed candidates document: ") + e.what());
    }
    return out;
}

std::vector<Intervention> load_candidates_file(const std::filesystem::path& path, const RewardSpec* spec)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open candidates file '" + path.string() + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed candidates document '" + path.string() + "': " + e.what());
    }
    return load_candidates(doc, spec);
}

std::vector<TiltedTrajectory> tilted_distribution(const TrajectoryModel& model, const TokenString& prompt,
                                                  const RewardFn& reward, double beta)
{
    if (!model.enumerable())
        throw NonEnumerableError("exact tilt needs an enumerable model; use tilted_importance_sample");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw DomainError("beta_r must be finite and >= 0");
    const auto support = enumerate_trajectories(model, prompt);
    std::vector<TiltedTrajectory> out;
    std::vector<double> log_w;
    out.reserve(support.size());
    for (const auto& y : support) {
        const double r = reward(y.string);
        if (!std::isfinite(r)) throw DomainError("reward is not finite");
        out.push_back({y.string, y.probability, r, 0.0});
        log_w.push_back(y.log_probability + beta * r);
    }
    const double z = log_sum_exp(log_w);
    CompensatedSum total;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].probability = beta == 0.0 ? out[i].baseline_probability : std::exp(log_w[i] - z);
        total.add(out[i].probability);
    }
    if (beta != 0.0) {
        const double t = total.value();
        for (auto& y : out) y.probability /= t;
    }
    return out;
}

std::vector<TiltedTrajectory> tilted_distribution(const TrajectoryModel& model, const RewardSpec& spec, double beta)
{
    return tilted_distribution(
        model, spec.prompt, [&spec](const TokenString& y) { return stay_reward(y, spec); }, beta);
}

ImportanceSample tilted_importance_sample(const TrajectoryModel& model, const TokenString& prompt,
                                          const RewardFn& reward, double beta, std::size_t samples,
                                          std::uint64_t seed)
{
    if (samples == 0) throw DomainError("importance sampling needs at least one draw");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw DomainError("beta_r must be finite and >= 0");
    ImportanceSample is;
    is.draws = sample_trajectories(model, prompt, seed, samples);
    std::vector<double> log_w;
    for (const auto& y : is.draws) {
        const double r = reward(y);
        if (!std::isfinite(r)) throw DomainError("reward is not finite");
        is.rewards.push_back(r);
        log_w.push_back(beta * r);
    }
    const double z = log_sum_exp(log_w);
    CompensatedSum sq;
    for (double lw : log_w) {
        const double w = std::exp(lw - z);
        is.weights.push_back(w);
        sq.add(w * w);
    }
    is.effective_sample_size = 1.0 / sq.value();
    return is;
}

// --- trade-off demonstration ----------------------------------------------

bool pareto_dominates(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size()) throw DomainError("criteria dimension mismatch");
    bool strictly = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] < b[i]) return false;
        if (a[i] > b[i]) strictly = true;
    }
    return strictly;
}

namespace {

TrajectoryModel single_trajectory_model(const Alphabet& alphabet, std::string_view token)
{
    BranchMap branches;
    const TokenString root;
    const Symbol s = alphabet.symbol(token);
    branches.emplace(root, NextTokenDistribution{{s, 1.0}});
    branches.emplace(root.extended(s), NextTokenDistribution{{Symbol::eos, 1.0}});
    return TrajectoryModel::from_branches(alphabet, 1, std::move(branches));
}

ParetoCandidate candidate_from(const ScoreBreakdown& b)
{
    ParetoCandidate c;
    c.core = b.core_w.values;
    c.score_explore = b.score_explore;
    c.score_diverge = b.score_diverge;
    c.rho_d = b.rho_d;
    c.score_even = b.score_even.value_or(0.0);
    c.score_inverted = b.score_inverted;
    c.rho_f = b.rho_f;
    return c;
}

} // namespace

ParetoReport pareto_demo(std::span<const double> baseline_core)
{
    const std::size_t n = baseline_core.size();
    if (n < 2) throw DomainError("trade-off demonstration needs n >= 2");
    for (double mu : baseline_core) {
        if (!std::isfinite(mu) || mu < 0.0 || mu > 1.0) throw DomainError("baseline core components must lie in [0,1]");
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    if (!(baseline_core[n - 1] < inv_n && inv_n < baseline_core[0])) {
        throw DomainError("hypothesis violated: need core_n < 1/n < core_1 (got core_1 = " +
                          format_double(baseline_core[0]) + ", core_n = " + format_double(baseline_core[n - 1]) +
                          ", 1/n = " + format_double(inv_n) + ")");
    }

    const Alphabet alphabet({"baseline", "w_d", "w_f"});
    const auto baseline = single_trajectory_model(alphabet, "baseline");
    const auto w_d = single_trajectory_model(alphabet, "w_d");
    const auto w_f = single_trajectory_model(alphabet, "w_f");

    std::vector<Structure> structures;
    for (std::size_t i = 0; i < n; ++i) {
        std::map<TokenString, double> table{
            {parse_string(alphabet, "baseline <eos>"), baseline_core[i]},
            {parse_string(alphabet, "w_d <eos>"), i + 1 == n ? 1.0 : 0.0},
            {parse_string(alphabet, "w_f <eos>"), inv_n},
        };
        structures.push_back(Structure::tabulated("alpha_" + std::to_string(i + 1), alphabet, std::move(table), {}));
    }
    const System system(std::move(structures));

    ScoreConfig cfg;
    cfg.metric = DiffMetric::l2raw;
    cfg.entropy_base = LogBase::natural;
    cfg.lambda_c = 0.0;

    const TokenString root;
    const ConstraintSystems none;
    ParetoReport report;
    report.n = n;
    report.baseline.assign(baseline_core.begin(), baseline_core.end());
    report.diversity_optimal = candidate_from(score_intervention(w_d, baseline, root, system, none, cfg));
    report.fairness_optimal = candidate_from(score_intervention(w_f, baseline, root, system, none, cfg));

    const auto& d = report.diversity_optimal;
    const auto& f = report.fairness_optimal;
    report.diversity_wins_rho_d = d.rho_d > f.rho_d;
    report.fairness_wins_rho_f = d.rho_f < f.rho_f;
    const double dv[] = {d.rho_d, d.rho_f};
    const double fv[] = {f.rho_d, f.rho_f};
    report.non_dominance = !pareto_dominates(dv, fv) && !pareto_dominates(fv, dv);
    report.baseline_strictly_decreasing = true;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (!(baseline_core[i] > baseline_core[i + 1])) report.baseline_strictly_decreasing = false;
    }
    report.conventions = "deterministic single-trajectory interventions; difference metric l2raw (unnormalized "
                         "Euclidean); natural-log entropy; all lambda weights 1";
    return report;
}

} // namespace xeno
