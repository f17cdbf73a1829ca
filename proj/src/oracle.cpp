#include "xeno/oracle.hpp"

#include "xeno/error.hpp"
#include "xeno/fixtures.hpp"
#include "xeno/random.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>

namespace xeno::oracle {

Rational to_rational(double x)
{
    if (!std::isfinite(x)) throw DomainError("cannot convert a non-finite value to a rational");
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x, std::chars_format::scientific);
    const std::string text(buf.data(), end);

    // d.ddddde[+-]xx
    const auto e_pos = text.find('e');
    std::string mantissa = text.substr(0, e_pos);
    int exponent = std::stoi(text.substr(e_pos + 1));
    bool negative = false;
    if (!mantissa.empty() && mantissa.front() == '-') {
        negative = true;
        mantissa.erase(0, 1);
    }
    if (const auto dot = mantissa.find('.'); dot != std::string::npos) {
        exponent -= static_cast<int>(mantissa.size() - dot - 1);
        mantissa.erase(dot, 1);
    }
    boost::multiprecision::cpp_int digits(mantissa);
    boost::multiprecision::cpp_int scale = boost::multiprecision::pow(boost::multiprecision::cpp_int(10),
                                                                      static_cast<unsigned>(std::abs(exponent)));
    Rational r = exponent >= 0 ? Rational(digits * scale) : Rational(digits, scale);
    return negative ? Rational(-r) : r;
}

double to_double(const Rational& r)
{
    return r.convert_to<double>();
}

std::vector<ExactTrajectory> brute_force_distribution(const TrajectoryModel& model, const TokenString& prompt)
{
    if (prompt.terminal()) return {{prompt, Rational(1)}};
    const auto& branches = model.branches();
    if (!branches.contains(prompt)) throw DomainError("oracle: prompt has no branch");

    std::vector<ExactTrajectory> out;
    std::vector<ExactTrajectory> stack{{prompt, Rational(1)}};
    while (!stack.empty()) {
        auto node = std::move(stack.back());
        stack.pop_back();
        if (node.string.terminal()) {
            out.push_back(std::move(node));
            continue;
        }
        // Each branch is renormalized exactly: a float branch such as
        // {a: 0.7, b: 1 - 0.7} sums to 1 only within rounding.
        const auto& dist = branches.at(node.string);
        Rational mass(0);
        for (const auto& o : dist) mass += to_rational(o.probability);
        for (const auto& [symbol, p] : dist) {
            if (p <= 0.0) continue;
            stack.push_back({node.string.extended(symbol), node.probability * to_rational(p) / mass});
        }
    }
    std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.string < y.string; });
    return out;
}

Rational brute_force_expectation_exact(const TrajectoryModel& model, const TokenString& prompt,
                                       const StringFunction& f)
{
    Rational total(0);
    for (const auto& y : brute_force_distribution(model, prompt)) total += y.probability * to_rational(f(y.string));
    return total;
}

double brute_force_expectation(const TrajectoryModel& model, const TokenString& prompt, const StringFunction& f)
{
    return to_double(brute_force_expectation_exact(model, prompt, f));
}

ExactDevianceStats brute_force_singleton_stats(const TrajectoryModel& model, const TokenString& prompt,
                                               const Structure& s)
{
    const auto dist = brute_force_distribution(model, prompt);
    ExactDevianceStats out;
    out.core = 0;
    for (const auto& y : dist) out.core += y.probability * to_rational(s.evaluate(y.string));
    Rational second(0);
    out.expected_abs = 0;
    for (const auto& y : dist) {
        const Rational d = to_rational(s.evaluate(y.string)) - out.core;
        out.expected_abs += y.probability * (d < 0 ? Rational(-d) : d);
        second += y.probability * d * d;
    }
    out.variance = second;
    return out;
}

GiniSimpsonResult gini_simpson_check(double mu)
{
    if (!(mu >= 0.0 && mu <= 1.0)) throw DomainError("mu must lie in [0,1]");
    const auto model = fixtures::two_leaf(mu);
    const auto alpha = Structure::token_indicator("alpha_star", model.alphabet(), "a");
    const auto stats = brute_force_singleton_stats(model, TokenString{}, alpha);
    const Rational gs = 2 * stats.core * (1 - stats.core);

    GiniSimpsonResult r;
    r.mu = to_double(stats.core);
    r.expected_abs_deviation = to_double(stats.expected_abs);
    r.variance = to_double(stats.variance);
    r.gini_simpson = to_double(gs);
    r.holds = stats.expected_abs == gs && stats.variance * 2 == gs;
    return r;
}

IivResult iiv_check(const TrajectoryModel& model, const ValiditySet& vs)
{
    const TokenString root;
    const auto dist = brute_force_distribution(model, root);
    IivResult r;
    r.core_exact = 0;
    r.err_exact = 0;
    Rational total(0);
    for (const auto& y : dist) {
        total += y.probability;
        if (vs.valid.contains(y.string)) {
            r.core_exact += y.probability;
        } else {
            r.err_exact += y.probability;
        }
    }
    const auto alpha = Structure::membership_set("alpha_iiv", model.alphabet(), vs.valid);
    r.core = brute_force_expectation(model, root, [&](const TokenString& y) { return alpha.evaluate(y); });
    r.err = to_double(r.err_exact);
    r.holds = total == 1 && r.core_exact == 1 - r.err_exact;
    return r;
}

ConsistencyBreadth consistency_breadth_check(const TrajectoryModel& model, const LanguageSet& language)
{
    const auto dist = brute_force_distribution(model, TokenString{});
    Rational core(0);
    std::set<TokenString> support;
    for (const auto& y : dist) {
        support.insert(y.string);
        if (language.members.contains(y.string)) core += y.probability;
    }
    ConsistencyBreadth r;
    r.core = to_double(core);
    r.consistent = core == 1;
    r.breadth = std::includes(support.begin(), support.end(), language.members.begin(), language.members.end());
    return r;
}

RelativeHomogenizationResult structure_relative_homogenization()
{
    const Alphabet alphabet({"a", "b", "c", "d"});
    const TokenString root;
    const Symbol a = alphabet.symbol("a");
    const Symbol b = alphabet.symbol("b");
    const Symbol c = alphabet.symbol("c");
    const Symbol d = alphabet.symbol("d");

    auto build = [&](double p_c) {
        BranchMap branches;
        branches.emplace(root, NextTokenDistribution{{a, 0.5}, {b, 0.5}});
        for (Symbol first : {a, b}) {
            const auto x = root.extended(first);
            NextTokenDistribution second{{c, p_c}};
            if (p_c < 1.0) second.push_back({d, 1.0 - p_c});
            branches.emplace(x, second);
            branches.emplace(x.extended(c), NextTokenDistribution{{Symbol::eos, 1.0}});
            if (p_c < 1.0) branches.emplace(x.extended(d), NextTokenDistribution{{Symbol::eos, 1.0}});
        }
        return TrajectoryModel::from_branches(alphabet, 2, std::move(branches));
    };
    const auto before = build(0.5);
    const auto after = build(1.0);

    const auto alpha_k = Structure::ngram_indicator("alpha_K", alphabet, std::vector<std::string>{"c", "<eos>"});
    const auto alpha_m = Structure::token_indicator("alpha_m", alphabet, "a");

    const auto k_before = brute_force_singleton_stats(before, root, alpha_k);
    const auto k_after = brute_force_singleton_stats(after, root, alpha_k);
    const auto m_before = brute_force_singleton_stats(before, root, alpha_m);
    const auto m_after = brute_force_singleton_stats(after, root, alpha_m);

    RelativeHomogenizationResult r;
    r.k_core_before = k_before.core;
    r.k_core_after = k_after.core;
    r.k_expected_deviance_after = k_after.expected_abs;
    r.m_expected_deviance_before = m_before.expected_abs;
    r.m_expected_deviance_after = m_after.expected_abs;
    r.m_variance_before = m_before.variance;
    r.m_variance_after = m_after.variance;
    r.holds = k_before.core < 1 && k_after.core == 1 && k_after.expected_abs == 0 &&
              m_before.expected_abs == m_after.expected_abs && m_before.variance == m_after.variance &&
              m_after.expected_abs > 0;
    return r;
}

// --- random generators ----------------------------------------------------

namespace {

std::size_t uniform_index(Rng& rng, std::size_t n)
{
    return static_cast<std::size_t>(rng.next() % n);
}

/// k positive integers summing to `total`.
std::vector<int> random_composition(Rng& rng, std::size_t k, int total)
{
    std::set<int> cuts;
    while (cuts.size() + 1 < k) cuts.insert(1 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(total - 1))));
    std::vector<int> parts;
    int prev = 0;
    for (int cut : cuts) {
        parts.push_back(cut - prev);
        prev = cut;
    }
    parts.push_back(total - prev);
    return parts;
}

void grow(Rng& rng, const TokenString& prefix, std::size_t n_tokens, std::size_t depth, BranchMap& branches)
{
    std::vector<Symbol> outcomes{Symbol::eos};
    for (std::size_t i = 0; i < n_tokens; ++i) outcomes.push_back(token_symbol(i));

    NextTokenDistribution dist;
    if (prefix.content_length() >= depth) {
        dist.push_back({Symbol::eos, 1.0});
    } else {
        std::vector<Symbol> positive;
        std::vector<Symbol> zero;
        for (Symbol s : outcomes) (rng.uniform() < 0.6 ? positive : zero).push_back(s);
        if (positive.empty()) positive.push_back(outcomes[uniform_index(rng, outcomes.size())]), zero.clear();
        const auto parts = random_composition(rng, positive.size(), 1000);
        for (std::size_t i = 0; i < positive.size(); ++i) dist.push_back({positive[i], parts[i] / 1000.0});
        for (Symbol s : zero) {
            if (rng.uniform() < 0.3) dist.push_back({s, 0.0});
        }
        std::sort(dist.begin(), dist.end(), [](const Outcome& x, const Outcome& y) { return x.symbol < y.symbol; });
    }
    for (const auto& [s, p] : dist) {
        if (s != Symbol::eos && p > 0.0) grow(rng, prefix.extended(s), n_tokens, depth, branches);
    }
    branches.emplace(prefix, std::move(dist));
}

} // namespace

TrajectoryModel random_tree_model(std::uint64_t seed, std::size_t max_tokens, std::size_t max_depth)
{
    if (max_tokens == 0 || max_depth == 0) throw DomainError("random tree needs tokens and depth");
    Rng rng(derive_seed(seed, 0x7472656575ULL));
    const std::size_t n_tokens = 1 + uniform_index(rng, max_tokens);
    const std::size_t depth = 1 + uniform_index(rng, max_depth);
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n_tokens; ++i) names.push_back(std::string(1, static_cast<char>('a' + i)));
    BranchMap branches;
    grow(rng, TokenString{}, n_tokens, depth, branches);
    return TrajectoryModel::from_branches(Alphabet(std::move(names)), depth, std::move(branches));
}

System random_indicator_system(const TrajectoryModel& model, std::uint64_t seed, std::size_t max_structures)
{
    Rng rng(derive_seed(seed, 0x73797374656dULL));
    const auto& alphabet = model.alphabet();
    const std::size_t n = 1 + uniform_index(rng, max_structures);
    const auto support = brute_force_distribution(model, TokenString{});

    std::vector<Structure> out;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string name = "s" + std::to_string(i);
        const auto pick_token = [&] { return alphabet.tokens()[uniform_index(rng, alphabet.size())]; };
        switch (uniform_index(rng, 4)) {
        case 0: out.push_back(Structure::token_indicator(name, alphabet, pick_token())); break;
        case 1: {
            const std::vector<std::string> gram{pick_token(), uniform_index(rng, 3) == 0 ? "<eos>" : pick_token()};
            out.push_back(Structure::ngram_indicator(name, alphabet, gram));
            break;
        }
        case 2: {
            std::set<TokenString> members;
            for (const auto& y : support) {
                if (rng.uniform() < 0.5) members.insert(y.string);
            }
            out.push_back(Structure::membership_set(name, alphabet, std::move(members)));
            break;
        }
        default: {
            std::map<TokenString, double> table;
            for (const auto& y : support) {
                if (rng.uniform() < 0.5) table.emplace(y.string, static_cast<double>(uniform_index(rng, 1001)) / 1000.0);
            }
            out.push_back(Structure::tabulated(name, alphabet, std::move(table),
                                               static_cast<double>(uniform_index(rng, 1001)) / 1000.0));
            break;
        }
        }
    }
    return System(std::move(out));
}

} // namespace xeno::oracle
