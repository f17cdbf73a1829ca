// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failed criteria (0 when everything holds).

#include "process.hpp"

#include "xeno/cores.hpp"
#include "xeno/error.hpp"
#include "xeno/fixtures.hpp"
#include "xeno/numeric.hpp"
#include "xeno/oracle.hpp"
#include "xeno/orientation.hpp"
#include "xeno/random.hpp"
#include "xeno/xeno.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

using namespace xeno;
using oracle::Rational;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Verdict {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what)
    {
        if (ok || !pass) {
            pass = pass && ok;
            return;
        }
        pass = false;
        detail = what;
    }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<TrajectoryModel> fixture_models()
{
    return {fixtures::m1(), fixtures::m2(), fixtures::m3()};
}

// --- 1 ---------------------------------------------------------------------

std::vector<double> random_baseline(Rng& rng, std::size_t n)
{
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<double> c(n);
    c.front() = inv_n + (1.0 - inv_n) * (0.001 + 0.998 * rng.uniform());
    c.back() = inv_n * (0.001 + 0.998 * rng.uniform());
    for (std::size_t i = 1; i + 1 < n; ++i) c[i] = c.back() + (c.front() - c.back()) * rng.uniform();
    std::sort(c.begin() + 1, c.end() - 1, std::greater<>());
    return c;
}

Rational squared_distance(const std::vector<Rational>& a, const std::vector<double>& b)
{
    Rational s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const Rational d = a[i] - oracle::to_rational(b[i]);
        s += d * d;
    }
    return s;
}

Verdict criterion_pareto()
{
    Verdict o;
    const auto t0 = Clock::now();
    Rng rng(derive_seed(2024, 1));
    for (std::size_t n = 2; n <= 6; ++n) {
        const double log_n = std::log(static_cast<double>(n));
        std::vector<Rational> e_n(n, Rational(0));
        e_n.back() = 1;
        const std::vector<Rational> uniform(n, Rational(1, static_cast<long>(n)));
        for (int k = 0; k < 100; ++k) {
            const auto base = random_baseline(rng, n);
            const auto p = pareto_demo(base);
            const auto& d = p.diversity_optimal;
            const auto& f = p.fairness_optimal;
            const std::string tag = "n = " + std::to_string(n) + ", baseline #" + std::to_string(k);
            o.require(p.baseline_strictly_decreasing, tag + ": generator produced an unsorted baseline");
            o.require(d.rho_d > f.rho_d, tag + ": rho_d(w_d) > rho_d(w_f)");
            // The explore term is the only nonzero part of rho_d; compare
            // squared distances exactly.
            o.require(squared_distance(e_n, base) > squared_distance(uniform, base), tag + ": exact rho_d order");
            o.require(std::abs(d.rho_f - 1.0) <= 1e-12, tag + ": rho_f(w_d) = 1");
            o.require(std::abs(f.rho_f - (1.0 + log_n)) <= 1e-12, tag + ": rho_f(w_f) = 1 + log n");
            o.require(d.rho_f < f.rho_f, tag + ": rho_f(w_d) < rho_f(w_f)");
            o.require(p.non_dominance, tag + ": non-dominance");
        }
    }
    const double elapsed = seconds_since(t0);
    o.require(elapsed < 1.0, "runtime " + format_double(elapsed) + " s");
    return o;
}

// --- 2 ---------------------------------------------------------------------

Verdict criterion_gini_simpson()
{
    Verdict o;
    const auto t0 = Clock::now();
    for (int k = 0; k <= 20; ++k) {
        const double mu = k * 0.05;
        const auto g = oracle::gini_simpson_check(mu);
        const std::string tag = "mu = " + format_double(mu);
        o.require(std::abs(g.expected_abs_deviation - 2.0 * mu * (1.0 - mu)) <= 1e-12, tag + ": E|a - mu|");
        o.require(std::abs(g.variance - mu * (1.0 - mu)) <= 1e-12, tag + ": Var a");
        o.require(g.holds, tag + ": exact identities");
    }
    const double elapsed = seconds_since(t0);
    o.require(elapsed < 1.0, "runtime " + format_double(elapsed) + " s");
    return o;
}

// --- 3 ---------------------------------------------------------------------

Verdict criterion_iiv()
{
    Verdict o;
    for (std::uint64_t i = 0; i < 100; ++i) {
        const auto m = oracle::random_tree_model(derive_seed(3, i));
        Rng rng(derive_seed(33, i));
        oracle::ValiditySet vs;
        for (const auto& y : enumerate_trajectories(m, TokenString{})) {
            if (rng.uniform() < 0.5) vs.valid.insert(y.string);
        }
        const auto r = oracle::iiv_check(m, vs);
        o.require(r.holds && r.core_exact == Rational(1) - r.err_exact, "pair #" + std::to_string(i));
    }
    return o;
}

// --- 4 ---------------------------------------------------------------------

Verdict criterion_escort()
{
    Verdict o;
    const auto ab = fixtures::ab_alphabet();
    const auto ya = parse_string(ab, "a <eos>");
    const auto yb = parse_string(ab, "b <eos>");
    std::vector<Structure> structures{fixtures::s2()[0], fixtures::s2()[1]};
    structures.push_back(Structure::tabulated("hi_a", ab, {{ya, 0.9}, {yb, 0.2}}, {}));
    structures.push_back(Structure::tabulated("hi_b", ab, {{ya, 0.2}, {yb, 0.9}}, {}));

    const char* names[] = {"M1", "M2", "M3"};
    const auto models = fixture_models();
    for (std::size_t mi = 0; mi < models.size(); ++mi) {
        const auto& m = models[mi];
        const auto support = enumerate_trajectories(m, TokenString{});
        double top = 0.0;
        for (const auto& y : support) top = std::max(top, y.probability);

        for (const auto& s : structures) {
            const std::string tag = std::string(names[mi]) + "/" + s.name();
            std::vector<double> a;
            std::vector<double> mode_a;
            for (const auto& y : support) {
                a.push_back(s.evaluate(y.string));
                if (y.probability == top) mode_a.push_back(a.back());
            }
            const double lo = *std::min_element(a.begin(), a.end());
            const double hi = *std::max_element(a.begin(), a.end());
            double plain = 0.0;
            for (double v : a) plain += v;
            plain /= static_cast<double>(a.size());
            double mode_mean = 0.0;
            for (double v : mode_a) mode_mean += v;
            mode_mean /= static_cast<double>(mode_a.size());
            const double mode_min = *std::min_element(mode_a.begin(), mode_a.end());

            auto g = [&](double q, double r) { return generalized_core(m, TokenString{}, s, {q, r}); };
            o.require(std::abs(g(1.0, 1.0) - structure_core(m, TokenString{}, s)) <= 1e-12, tag + ": (1, 1)");
            o.require(std::abs(g(1.0, 1e-6) - plain) <= 1e-6, tag + ": (1, 0) via r = 1e-6");
            o.require(std::abs(g(1.0, 1e3) - mode_mean) <= 1e-6, tag + ": (1, inf) via r = 1e3");
            o.require(std::abs(g(1e7, 1.0) - hi) <= 1e-6, tag + ": (inf, 1) via q = 1e7");
            if (lo > 0.0) {
                o.require(std::abs(g(-1e7, kInf) - mode_min) <= 1e-6, tag + ": (-inf, inf) via q = -1e7");
                o.require(g(-kInf, kInf) == mode_min, tag + ": (-inf, inf) exact");
            }
            o.require(std::abs(g(1.0, 0.0) - plain) <= 1e-12, tag + ": (1, 0) exact");
            o.require(g(kInf, 1.0) == hi, tag + ": (inf, 1) exact");
        }
    }
    return o;
}

// --- 5 ---------------------------------------------------------------------

Verdict criterion_tilt()
{
    Verdict o;
    for (std::uint64_t i = 0; i < 200; ++i) {
        const auto m = oracle::random_tree_model(derive_seed(5, i));
        const auto sys = oracle::random_indicator_system(m, derive_seed(5, i));
        const auto spec = make_reward_spec(m, TokenString{}, sys, {}, ScoreConfig{});
        for (double beta : {0.5, 2.0, 10.0}) {
            CompensatedSum total;
            for (const auto& t : tilted_distribution(m, spec, beta)) total.add(t.probability);
            o.require(std::abs(total.value() - 1.0) <= 1e-9, "tree #" + std::to_string(i) + ": normalization");
        }
        for (const auto& t : tilted_distribution(m, spec, 0.0))
            o.require(t.probability == t.baseline_probability, "tree #" + std::to_string(i) + ": beta = 0");
    }

    const auto m2 = fixtures::m2();
    const auto alpha_a = fixtures::s1()[0];
    const RewardFn reward = [&](const TokenString& y) { return alpha_a.evaluate(y); };
    const auto t = tilted_distribution(m2, TokenString{}, reward, std::log(3.0));
    o.require(t.size() == 2, "M2 support");
    if (t.size() != 2) return o;
    o.require(std::abs(t[0].probability - 0.5) <= 1e-12 && std::abs(t[1].probability - 0.5) <= 1e-12,
              "M2, beta = ln 3: (0.5, 0.5)");

    const std::size_t n = 100000;
    const std::vector<double> probs{t[0].probability, t[1].probability};
    const auto idx = sample_categorical(probs, 28, n);
    const auto hits = static_cast<double>(std::count(idx.begin(), idx.end(), std::size_t{0}));
    const double sigma = std::sqrt(0.25 / static_cast<double>(n));
    o.require(std::abs(hits / static_cast<double>(n) - 0.5) <= 3.0 * sigma, "1e5 draws within 3 sigma");
    return o;
}

// --- 6 ---------------------------------------------------------------------

Verdict criterion_total_expectation()
{
    Verdict o;
    for (std::uint64_t i = 0; i < 500; ++i) {
        const auto m = oracle::random_tree_model(derive_seed(6, i));
        const auto sys = oracle::random_indicator_system(m, derive_seed(6, i));
        const std::string tag = "tree #" + std::to_string(i);
        for (const auto& [prefix, dist] : m.branches()) {
            const auto parent = system_core(m, prefix, sys).values;
            std::vector<CompensatedSum> acc(sys.size());
            for (const auto& [sym, p] : dist) {
                if (p <= 0.0) continue;
                const auto child = prefix.extended(sym);
                const auto v = child.terminal() ? evaluate_system(sys, child).values : system_core(m, child, sys).values;
                for (std::size_t k = 0; k < v.size(); ++k) acc[k].add(p * v[k]);
            }
            for (std::size_t k = 0; k < parent.size(); ++k)
                o.require(std::abs(parent[k] - acc[k].value()) <= 1e-12, tag + ": decomposition");
        }
        const auto core = system_core(m, TokenString{}, sys).values;
        for (std::size_t k = 0; k < sys.size(); ++k) {
            const double exact = oracle::to_double(oracle::brute_force_expectation_exact(
                m, TokenString{}, [&](const TokenString& y) { return sys[k].evaluate(y); }));
            o.require(std::abs(core[k] - exact) <= 1e-12, tag + ": oracle");
        }
    }
    return o;
}

// --- 7 ---------------------------------------------------------------------

void dynamics_case(Verdict& o, const TrajectoryModel& m, const System& sys, const TokenString& y,
                   const std::string& tag)
{
    const auto trace = dynamics_trace(m, sys, y, TokenString{});
    const auto lambda = evaluate_system(sys, y).values;
    o.require(trace.back().core_state == lambda, tag + ": phi_x(T) = Lambda(y)");
    for (double z : trace.back().remaining) o.require(z == 0.0, tag + ": phi_z(T) = 0");
    o.require(trace.front().remaining == trace.back().accumulated, tag + ": phi_z(0) = phi_y(T)");
}

Verdict criterion_dynamics()
{
    Verdict o;
    for (const auto& m : fixture_models()) {
        for (const auto& sys : {fixtures::s1(), fixtures::s2()}) {
            for (const auto& y : enumerate_trajectories(m, TokenString{}))
                dynamics_case(o, m, sys, y.string, "fixture " + format_string(m.alphabet(), y.string));
        }
    }
    for (std::uint64_t i = 0; i < 100; ++i) {
        const auto m = oracle::random_tree_model(derive_seed(7, i));
        const auto sys = oracle::random_indicator_system(m, derive_seed(7, i));
        const auto y = sample_trajectory(m, TokenString{}, derive_seed(77, i));
        dynamics_case(o, m, sys, y, "pair #" + std::to_string(i));
    }
    return o;
}

// --- 8 ---------------------------------------------------------------------

// Keeps only the first positive outcome of every branch along one path.
TrajectoryModel collapse(const TrajectoryModel& m)
{
    BranchMap branches;
    TokenString x;
    while (!x.terminal()) {
        const auto* dist = m.find_branch(x);
        Symbol pick = Symbol::eos;
        for (const auto& [sym, p] : *dist) {
            if (p > 0.0) {
                pick = sym;
                break;
            }
        }
        branches.emplace(x, NextTokenDistribution{xeno::Outcome{pick, 1.0}});
        x = x.extended(pick);
    }
    return TrajectoryModel::from_branches(m.alphabet(), m.max_len(), std::move(branches));
}

Verdict criterion_homogenization()
{
    Verdict o;
    const auto h = homogenization_report(fixtures::m2(), fixtures::m3(), TokenString{}, fixtures::s1(),
                                         DiffMetric::l2norm);
    o.require(h.delta_expected == -0.375, "M2 -> M3: delta E = " + format_double(h.delta_expected));
    o.require(h.delta_variance == -0.046875, "M2 -> M3: delta Var = " + format_double(h.delta_variance));

    for (const auto& sys : {fixtures::s1(), fixtures::s2()}) {
        const auto d = deviance_stats(fixtures::m3(), TokenString{}, sys, DiffMetric::l2norm);
        o.require(d.expected == 0.0 && d.variance == 0.0, "M3");
    }
    const DiffMetric metrics[] = {DiffMetric::abs_mean, DiffMetric::l2norm, DiffMetric::linf, DiffMetric::l2raw};
    for (std::uint64_t i = 0; i < 100; ++i) {
        const auto m = collapse(oracle::random_tree_model(derive_seed(8, i)));
        const auto sys = oracle::random_indicator_system(m, derive_seed(8, i));
        for (auto metric : metrics) {
            const auto d = deviance_stats(m, TokenString{}, sys, metric);
            o.require(d.expected == 0.0 && d.variance == 0.0, "deterministic tree #" + std::to_string(i));
        }
    }
    return o;
}

// --- 9 ---------------------------------------------------------------------

Verdict criterion_inverted_tie()
{
    Verdict o;
    const std::vector<double> w0{0.6, 0.1};
    const std::vector<double> w{0.5, 0.5};
    o.require(score_inverted(w, w0) == 1.0, "score_inverted(uniform, (0.6, 0.1))");
    o.require(relative_order_sign(w, 0, 1) == 0, "uniform core is a tie");
    o.require(pareto_demo(w0).fairness_optimal.score_inverted == 1.0, "through the trade-off construction");
    return o;
}

// --- 10 --------------------------------------------------------------------

Verdict criterion_determinism(const std::string& cli, const std::string& fixtures_dir)
{
    Verdict o;
    const auto q = [](const std::string& s) { return test::quoted(s); };
    const auto fx = [&](const std::string& n) { return q(fixtures_dir + "/" + n); };
    const std::vector<std::pair<std::string, std::string>> commands{
        {"analyze", "analyze --model " + fx("m2.json") + " --model " + fx("m3.json") + " --system " + fx("s2.json") +
                        " --escort 1,2"},
        {"analyze-csv", "analyze --model " + fx("m1.json") + " --system " + fx("s2.json") + " --format csv"},
        {"dynamics", "dynamics --model " + fx("m2.json") + " --system " + fx("s1.json") + " --trajectory 'b <eos>'"},
        {"score", "score --model " + fx("m2.json") + " --system " + fx("s2.json") + " --candidates " +
                      fx("candidates.json") + " --constraints " + fx("constraints.json") + " --seed 17"},
        {"sample", "sample --model " + fx("m2.json") + " --system " + fx("s1.json") + " --constraints " +
                       fx("constraints.json") + " --config " + fx("tilt_config.json") + " --seed 17 --count 2000"},
        {"sample-is", "sample --model " + fx("m1.json") + " --system " + fx("s2.json") +
                          " --seed 17 --count 500 --importance --format csv"},
        {"pareto", "pareto 3 0.7,0.2,0.1"},
        {"verify", "verify --seed 17 --trees 30"},
    };
    const auto dir = std::filesystem::temp_directory_path() / ("xeno_acceptance_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    for (const auto& [name, args] : commands) {
        std::string reports[2];
        for (int k = 0; k < 2; ++k) {
            const auto path = dir / (name + "." + std::to_string(k));
            const auto r = test::run(q(cli) + " " + args + " --out " + q(path.string()));
            o.require(r.exit_code == 0, name + ": exit code " + std::to_string(r.exit_code));
            reports[k] = test::slurp(path);
        }
        o.require(!reports[0].empty(), name + ": empty report");
        o.require(reports[0] == reports[1], name + ": reports differ");
    }
    std::filesystem::remove_all(dir);
    return o;
}

} // namespace

int main(int argc, char** argv)
{
    std::string cli = XENO_CLI;
    std::string fixtures_dir = XENO_FIXTURES;
    if (argc > 1) cli = argv[1];
    if (argc > 2) fixtures_dir = argv[2];

    struct Criterion {
        int id;
        const char* title;
        std::function<Verdict()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "Pareto trade-off reproduction, n = 2..6", criterion_pareto},
        {2, "Gini-Simpson identities", criterion_gini_simpson},
        {3, "IIV mapping on 100 random pairs", criterion_iiv},
        {4, "escort limits on M1-M3", criterion_escort},
        {5, "tilt correctness", criterion_tilt},
        {6, "law of total expectation and oracle equality, 500 trees", criterion_total_expectation},
        {7, "dynamics identities", criterion_dynamics},
        {8, "homogenization comparator", criterion_homogenization},
        {9, "score-inverted tie rule", criterion_inverted_tie},
        {10, "end-to-end CLI determinism", [&] { return criterion_determinism(cli, fixtures_dir); }},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        Verdict o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << c.id << ": " << c.title;
        if (!o.pass) std::cout << " (" << o.detail << ")";
        std::cout << '\n';
    }
    std::cout << (10 - failed) << "/10 criteria passed\n";
    return failed;
}
