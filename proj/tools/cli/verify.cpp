#include "commands.hpp"

#include "output.hpp"

#include "xeno/cores.hpp"
#include "xeno/error.hpp"
#include "xeno/fixtures.hpp"
#include "xeno/numeric.hpp"
#include "xeno/oracle.hpp"
#include "xeno/orientation.hpp"
#include "xeno/random.hpp"
#include "xeno/xeno.hpp"

#include <cmath>
#include <sstream>

#ifndef XENO_VERSION
#define XENO_VERSION "0.0.0"
#endif

namespace xeno::cli {

namespace {

constexpr double kTol = 1e-12;

struct Check {
    explicit Check(std::string n) : name(std::move(n)) {}

    std::string name;
    std::size_t cases = 0;
    std::size_t failures = 0;
    std::string first_failure;

    void expect(bool ok, const std::string& what)
    {
        ++cases;
        if (ok) return;
        if (failures++ == 0) first_failure = what;
    }
};

struct Subject {
    std::string label;
    TrajectoryModel model;
    System system;
};

std::vector<Subject> fixture_subjects()
{
    std::vector<Subject> out;
    const std::pair<const char*, TrajectoryModel> models[] = {
        {"m1", fixtures::m1()}, {"m2", fixtures::m2()}, {"m3", fixtures::m3()}};
    for (const auto& [name, m] : models) {
        out.push_back({std::string(name) + "/s1", m, fixtures::s1()});
        out.push_back({std::string(name) + "/s2", m, fixtures::s2()});
    }
    return out;
}

std::vector<Subject> random_subjects(std::uint64_t seed, std::size_t count)
{
    std::vector<Subject> out;
    for (std::size_t i = 0; i < count; ++i) {
        const auto s = derive_seed(seed, i);
        auto m = oracle::random_tree_model(s);
        auto sys = oracle::random_indicator_system(m, s);
        out.push_back({"random#" + std::to_string(i), std::move(m), std::move(sys)});
    }
    return out;
}

void oracle_equivalence(Check& c, const Subject& s)
{
    const auto core = system_core(s.model, TokenString{}, s.system);
    for (std::size_t i = 0; i < s.system.size(); ++i) {
        const double o = oracle::brute_force_expectation(s.model, TokenString{},
                                                         [&](const TokenString& y) { return s.system[i].evaluate(y); });
        c.expect(std::abs(core.values[i] - o) <= kTol, s.label + ": core of " + s.system[i].name());
    }
}

void child_decomposition(Check& c, const Subject& s)
{
    for (const auto& [prefix, dist] : s.model.branches()) {
        const auto parent = system_core(s.model, prefix, s.system).values;
        std::vector<CompensatedSum> acc(s.system.size());
        for (const auto& [sym, p] : dist) {
            if (p <= 0.0) continue;
            const auto child = prefix.extended(sym);
            const auto v = child.terminal() ? evaluate_system(s.system, child).values
                                            : system_core(s.model, child, s.system).values;
            for (std::size_t i = 0; i < v.size(); ++i) acc[i].add(p * v[i]);
        }
        for (std::size_t i = 0; i < parent.size(); ++i) {
            c.expect(std::abs(parent[i] - acc[i].value()) <= kTol,
                     s.label + ": prefix '" + format_string(s.model.alphabet(), prefix) + "'");
        }
    }
}

void dynamics_identities(Check& c, const Subject& s)
{
    for (const auto& y : enumerate_trajectories(s.model, TokenString{})) {
        const auto trace = dynamics_trace(s.model, s.system, y.string, TokenString{});
        const auto lambda = evaluate_system(s.system, y.string).values;
        const auto& first = trace.front();
        const auto& last = trace.back();
        bool ok = last.core_state == lambda;
        for (double z : last.remaining) ok = ok && z == 0.0;
        ok = ok && first.remaining == last.accumulated;
        c.expect(ok, s.label + ": " + format_string(s.model.alphabet(), y.string));
    }
}

std::vector<Check> run_suite(const RunConfig& cfg, const std::vector<Subject>& user)
{
    std::vector<Check> checks;
    const std::uint64_t seed = cfg.seed.value_or(0);
    const auto fixed = fixture_subjects();
    const auto random = random_subjects(seed, cfg.random_trees);

    {
        Check c{"gini_simpson"};
        for (int k = 0; k <= 20; ++k) {
            const double mu = k * 0.05;
            const auto g = oracle::gini_simpson_check(mu);
            c.expect(g.holds && std::abs(g.expected_abs_deviation - 2.0 * mu * (1.0 - mu)) <= kTol &&
                         std::abs(g.variance - mu * (1.0 - mu)) <= kTol,
                     "mu = " + format_double(mu));
        }
        checks.push_back(std::move(c));
    }
    {
        Check c{"iiv_mapping"};
        const auto m2 = fixtures::m2();
        const auto r = oracle::iiv_check(m2, {{parse_string(m2.alphabet(), "a <eos>")}});
        c.expect(r.holds && r.core == 0.25 && r.err == 0.75, "m2 with V = {a}");
        for (std::size_t i = 0; i < random.size(); ++i) {
            const auto& s = random[i];
            Rng rng(derive_seed(seed ^ 0x11u, i));
            oracle::ValiditySet vs;
            for (const auto& y : enumerate_trajectories(s.model, TokenString{})) {
                if (rng.uniform() < 0.5) vs.valid.insert(y.string);
            }
            c.expect(oracle::iiv_check(s.model, vs).holds, s.label);
        }
        checks.push_back(std::move(c));
    }
    {
        Check c{"consistency_breadth"};
        const auto m2 = fixtures::m2();
        const auto& ab = m2.alphabet();
        const auto a = parse_string(ab, "a <eos>");
        const auto b = parse_string(ab, "b <eos>");
        const auto full = oracle::consistency_breadth_check(m2, {{a, b}});
        c.expect(full.consistent && full.breadth, "m2 with K = {a, b}");
        const auto collapsed = oracle::consistency_breadth_check(fixtures::m3(), {{a, b}});
        c.expect(collapsed.consistent && !collapsed.breadth, "m3 with K = {a, b}");
        const auto narrow = oracle::consistency_breadth_check(m2, {{a}});
        c.expect(!narrow.consistent && narrow.breadth, "m2 with K = {a}");
        checks.push_back(std::move(c));
    }
    {
        Check c{"relative_homogenization"};
        c.expect(oracle::structure_relative_homogenization().holds, "constructed fixture pair");
        checks.push_back(std::move(c));
    }

    auto over_all = [&](const char* name, void (*fn)(Check&, const Subject&)) {
        Check c{name};
        for (const auto& s : fixed) fn(c, s);
        for (const auto& s : random) fn(c, s);
        for (const auto& s : user) fn(c, s);
        checks.push_back(std::move(c));
    };
    over_all("oracle_equivalence", oracle_equivalence);
    over_all("child_decomposition", child_decomposition);
    over_all("dynamics_identities", dynamics_identities);

    {
        Check c{"escort_unit_parameters"};
        auto run = [&](const Subject& s) {
            for (const auto& st : s.system.structures()) {
                const double g = generalized_core(s.model, TokenString{}, st, {1.0, 1.0});
                const double e = structure_core(s.model, TokenString{}, st);
                c.expect(std::abs(g - e) <= kTol, s.label + ": " + st.name());
            }
        };
        for (const auto& s : fixed) run(s);
        for (const auto& s : user) run(s);
        checks.push_back(std::move(c));
    }
    {
        Check c{"tilt"};
        const auto m2 = fixtures::m2();
        const auto alpha_a = fixtures::s1()[0];
        const RewardFn reward = [&](const TokenString& y) { return alpha_a.evaluate(y); };
        const auto t = tilted_distribution(m2, TokenString{}, reward, std::log(3.0));
        c.expect(t.size() == 2 && std::abs(t[0].probability - 0.5) <= kTol && std::abs(t[1].probability - 0.5) <= kTol,
                 "m2 with beta = ln 3");
        auto run = [&](const Subject& s) {
            const auto spec = make_reward_spec(s.model, TokenString{}, s.system, {}, ScoreConfig{});
            CompensatedSum total;
            for (const auto& x : tilted_distribution(s.model, spec, 1.5)) total.add(x.probability);
            c.expect(std::abs(total.value() - 1.0) <= 1e-9, s.label + ": normalization");
            bool same = true;
            for (const auto& x : tilted_distribution(s.model, spec, 0.0)) same = same && x.probability == x.baseline_probability;
            c.expect(same, s.label + ": beta = 0");
        };
        for (const auto& s : fixed) run(s);
        for (const auto& s : random) run(s);
        for (const auto& s : user) run(s);
        checks.push_back(std::move(c));
    }
    {
        Check c{"homogenization"};
        const auto h = homogenization_report(fixtures::m2(), fixtures::m3(), TokenString{}, fixtures::s1(),
                                             DiffMetric::l2norm);
        c.expect(h.delta_expected == -0.375 && h.delta_variance == -0.046875, "m2 -> m3");
        const auto d = deviance_stats(fixtures::m3(), TokenString{}, fixtures::s2(), DiffMetric::l2norm);
        c.expect(d.expected == 0.0 && d.variance == 0.0, "deterministic m3");
        checks.push_back(std::move(c));
    }
    {
        Check c{"pareto"};
        const double base[] = {0.6, 0.1};
        const auto p = pareto_demo(base);
        c.expect(p.diversity_wins_rho_d && p.fairness_wins_rho_f && p.non_dominance, "n = 2, (0.6, 0.1)");
        c.expect(std::abs(p.diversity_optimal.rho_f - 1.0) <= kTol, "rho_f(w_d) = 1");
        c.expect(std::abs(p.fairness_optimal.rho_f - (1.0 + std::log(2.0))) <= kTol, "rho_f(w_f) = 1 + ln 2");
        checks.push_back(std::move(c));
    }
    {
        Check c{"score_inverted_ties"};
        const double w0[] = {0.6, 0.1};
        const double w[] = {0.5, 0.5};
        c.expect(score_inverted(w, w0) == 1.0, "uniform vs (0.6, 0.1)");
        checks.push_back(std::move(c));
    }
    return checks;
}

} // namespace

CommandResult cmd_verify(const RunConfig& cfg)
{
    WarningLog log;
    std::vector<Subject> user;
    if (!cfg.models.empty()) {
        if (cfg.system.empty()) throw ConfigError("--system is required with --model");
        for (const auto& path : cfg.models) {
            auto m = load_model_file(path);
            auto sys = load_system_file(cfg.system, m.alphabet());
            user.push_back({path, std::move(m), std::move(sys)});
        }
    }
    const Format format = cfg.format.value_or(Format::json);
    const auto checks = run_suite(cfg, user);
    std::size_t failed = 0;
    for (const auto& c : checks) failed += c.failures > 0 ? 1 : 0;
    const int code = failed ? kExitIdentity : kExitOk;

    if (format == Format::csv) {
        std::ostringstream out;
        out << "check,passed,cases,failures,first_failure\n";
        for (const auto& c : checks) {
            out << c.name << ',' << (c.failures ? "false" : "true") << ',' << c.cases << ',' << c.failures << ','
                << csv_field(c.first_failure) << '\n';
        }
        return {out.str(), code};
    }

    Json r;
    r["tool"] = {{"name", "xeno"}, {"version", XENO_VERSION}};
    r["command"] = "verify";
    r["config"] = {{"models", cfg.models},
                   {"system", cfg.system.empty() ? Json() : Json(cfg.system)},
                   {"seed", cfg.seed.value_or(0)},
                   {"random_trees", cfg.random_trees},
                   {"format", "json"}};
    Json list = Json::array();
    for (const auto& c : checks) {
        list.push_back({{"check", c.name},
                        {"passed", c.failures == 0},
                        {"cases", c.cases},
                        {"failures", c.failures},
                        {"first_failure", c.first_failure.empty() ? Json() : Json(c.first_failure)}});
    }
    r["checks"] = std::move(list);
    r["failed"] = failed;
    r["passed"] = failed == 0;
    r["warnings"] = log.messages();
    return {r.dump(2) + '\n', code};
}

} // namespace xeno::cli
