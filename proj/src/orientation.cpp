#include "xeno/orientation.hpp"

#include "xeno/error.hpp"
#include "xeno/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace xeno {

OrientationVector orientation(std::span<const double> compliance, std::span<const double> core)
{
    if (compliance.size() != core.size())
        throw DomainError("dimension mismatch: " + std::to_string(compliance.size()) + " vs " +
                          std::to_string(core.size()));
    OrientationVector o;
    o.reference.assign(core.begin(), core.end());
    o.values.reserve(core.size());
    for (std::size_t i = 0; i < core.size(); ++i) o.values.push_back(compliance[i] - core[i]);
    return o;
}

OrientationVector orientation(const ComplianceVector& v, const CoreVector& core)
{
    return orientation(v.values, core.values);
}

double deviance(const OrientationVector& o, DiffMetric m)
{
    return metric_norm(o.values, m);
}

double prompted_deviance(const TrajectoryModel& model, const TokenString& prompt, const System& system,
                         DiffMetric m, const TokenString& y)
{
    const auto core = system_core(model, prompt, system);
    return deviance(orientation(evaluate_system(system, y), core), m);
}

DevianceStats deviance_stats(const TrajectoryModel& model, const TokenString& prompt, const System& system,
                             DiffMetric m)
{
    const auto support = continuation_support(model, prompt);
    const auto core = system_core(model, prompt, system);
    CompensatedSum first;
    CompensatedSum second;
    for (const auto& y : support) {
        const double d = deviance(orientation(evaluate_system(system, y.string), core), m);
        first.add(y.probability * d);
        second.add(y.probability * d * d);
    }
    DevianceStats stats;
    stats.metric = m;
    stats.expected = std::max(0.0, first.value());
    stats.variance = std::max(0.0, second.value() - stats.expected * stats.expected);
    return stats;
}

DevianceStats estimate_deviance_stats_mc(const TrajectoryModel& model, const TokenString& prompt,
                                         const System& system, DiffMetric m, std::size_t samples,
                                         std::uint64_t seed)
{
    if (samples < 2) throw DomainError("Monte Carlo deviance needs at least 2 samples");
    const auto draws = sample_trajectories(model, prompt, seed, samples);
    std::vector<ComplianceVector> lambdas;
    lambdas.reserve(draws.size());
    std::vector<CompensatedSum> mean(system.size());
    for (const auto& y : draws) {
        lambdas.push_back(evaluate_system(system, y));
        for (std::size_t i = 0; i < system.size(); ++i) mean[i].add(lambdas.back().values[i]);
    }
    const auto count = static_cast<double>(samples);
    std::vector<double> core;
    for (auto& s : mean) core.push_back(s.value() / count);

    CompensatedSum first;
    CompensatedSum second;
    for (const auto& v : lambdas) {
        const double d = deviance(orientation(v.values, core), m);
        first.add(d);
        second.add(d * d);
    }
    DevianceStats stats;
    stats.metric = m;
    stats.expected = first.value() / count;
    stats.variance = std::max(0.0, second.value() / count - stats.expected * stats.expected);
    stats.provenance = MonteCarloProvenance{samples, {}};
    return stats;
}

Preorder rank_strings(const TrajectoryModel& model, const TokenString& prompt, const System& system, DiffMetric m,
                      std::span<const TokenString> strings)
{
    const auto core = system_core(model, prompt, system);
    std::vector<double> dev;
    dev.reserve(strings.size());
    for (const auto& x : strings) dev.push_back(deviance(orientation(evaluate_system(system, x), core), m));
    return rank_by_value(dev);
}

// --- Rényi / Hill ---------------------------------------------------------

namespace {

void check_normalized(std::span<const double> v, const char* what)
{
    CompensatedSum total;
    for (double x : v) {
        if (!std::isfinite(x) || x < 0.0 || x > 1.0 + 1e-12)
            throw DomainError(std::string(what) + " has a component outside [0,1]");
        total.add(x);
    }
    if (std::abs(total.value() - 1.0) > 1e-9) throw DomainError(std::string(what) + " is not normalized");
}

} // namespace

double renyi_relative_entropy(std::span<const double> p, std::span<const double> r, double q)
{
    if (p.size() != r.size()) throw DomainError("dimension mismatch in relative entropy");
    if (std::isnan(q)) throw DomainError("relative entropy order is NaN");
    check_normalized(p, "first argument");
    check_normalized(r, "second argument");
    constexpr double inf = std::numeric_limits<double>::infinity();

    if (std::isinf(q)) {
        double best = q > 0 ? -inf : inf;
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (p[i] <= 0.0) continue;
            const double lr = r[i] > 0.0 ? std::log(p[i]) - std::log(r[i]) : inf;
            best = q > 0 ? std::max(best, lr) : std::min(best, lr);
        }
        return best;
    }
    if (q == 1.0) {
        CompensatedSum acc;
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (p[i] <= 0.0) continue;
            if (r[i] <= 0.0) return inf;
            acc.add(p[i] * (std::log(p[i]) - std::log(r[i])));
        }
        return acc.value();
    }
    std::vector<double> terms;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) continue;
        if (r[i] <= 0.0) {
            if (q > 1.0) return inf;
            continue; // r^(1-q) = 0 for q < 1
        }
        terms.push_back(q * std::log(p[i]) + (1.0 - q) * std::log(r[i]));
    }
    if (terms.empty()) return inf; // sum is 0 and q < 1: log 0 / (q - 1) = +inf
    return log_sum_exp(terms) / (q - 1.0);
}

HillDeviances hill_deviances(std::span<const double> v_norm, std::span<const double> c_norm, double q)
{
    return {std::exp(renyi_relative_entropy(v_norm, c_norm, q)), std::exp(renyi_relative_entropy(c_norm, v_norm, q))};
}

DevianceFamily subtraction_deviance(DiffMetric m)
{
    return {std::string("subtraction+") + std::string(to_string(m)),
            [](std::span<const double> v, std::span<const double> c) { return orientation(v, c).values; },
            [m](std::span<const double> d) { return metric_norm(d, m); }};
}

namespace {

std::vector<double> store_both(std::span<const double> v, std::span<const double> c)
{
    if (v.size() != c.size()) throw DomainError("dimension mismatch in orientation");
    auto out = normalized_core(v);
    const auto cn = normalized_core(c);
    out.insert(out.end(), cn.begin(), cn.end());
    return out;
}

DevianceFamily hill_family(double q, bool excess)
{
    return {std::string(excess ? "hill_excess(" : "hill_deficit(") + format_double(q) + ")", store_both,
            [q, excess](std::span<const double> both) {
                const auto half = both.size() / 2;
                const auto h = hill_deviances(both.first(half), both.subspan(half), q);
                return excess ? h.excess : h.deficit;
            }};
}

} // namespace

DevianceFamily hill_excess_deviance(double q)
{
    return hill_family(q, true);
}

DevianceFamily hill_deficit_deviance(double q)
{
    return hill_family(q, false);
}

// --- dynamics -------------------------------------------------------------

std::vector<DynamicsState> dynamics_trace(const TrajectoryModel& model, const System& system, const TokenString& y,
                                          const TokenString& base_prompt)
{
    if (!y.terminal()) throw DomainError("dynamics need a terminal trajectory");
    if (!base_prompt.is_prefix_of(y)) throw DomainError("trajectory does not extend the base prompt");
    if (base_prompt.terminal()) throw DomainError("base prompt must be non-terminal");
    if (!std::isfinite(trajectory_log_probability(model, base_prompt, y)))
        throw DomainError("trajectory '" + format_string(model.alphabet(), y) + "' has zero probability under the model");

    const auto lambda_y = evaluate_system(system, y).values;
    const auto base_core = system_core(model, base_prompt, system).values;
    const std::size_t steps = y.size() - base_prompt.size();

    std::vector<DynamicsState> trace;
    trace.reserve(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) {
        const auto x_k = y.prefix(base_prompt.size() + k);
        DynamicsState s;
        s.step = k;
        s.token = x_k.back();
        s.core_state = system_core(model, x_k, system).values;
        s.accumulated = orientation(evaluate_system(system, x_k).values, base_core).values;
        s.remaining = orientation(lambda_y, s.core_state).values;
        trace.push_back(std::move(s));
    }
    return trace;
}

std::string dynamics_csv(const Alphabet& alphabet, const System& system, std::span<const DynamicsState> trace)
{
    std::ostringstream out;
    out << "step,token";
    for (const auto& name : system.names()) out << ",phi_x." << name << ",phi_y." << name << ",phi_z." << name;
    out << '\n';
    for (const auto& s : trace) {
        out << s.step << ',' << alphabet.name(s.token);
        for (std::size_t i = 0; i < system.size(); ++i) {
            out << ',' << format_double(s.core_state[i]) << ',' << format_double(s.accumulated[i]) << ','
                << format_double(s.remaining[i]);
        }
        out << '\n';
    }
    return out.str();
}

// --- homogenization -------------------------------------------------------

namespace {

HomogenizationSide side(const TrajectoryModel& model, const TokenString& prompt, const System& system, DiffMetric m,
                        LogBase base)
{
    const auto stats = deviance_stats(model, prompt, system, m);
    HomogenizationSide s;
    s.expected_deviance = stats.expected;
    s.deviance_variance = stats.variance;
    s.core = system_core(model, prompt, system).values;
    if (compensated_sum(s.core) > 0.0) s.core_entropy = core_entropy(s.core, base);
    return s;
}

} // namespace

HomogenizationReport homogenization_report(const TrajectoryModel& before, const TrajectoryModel& after,
                                           const TokenString& prompt, const System& system, DiffMetric m,
                                           LogBase base)
{
    if (!(before.alphabet() == after.alphabet())) throw DomainError("homogenization comparison needs a shared alphabet");
    HomogenizationReport r;
    r.before = side(before, prompt, system, m, base);
    r.after = side(after, prompt, system, m, base);
    r.delta_expected = r.after.expected_deviance - r.before.expected_deviance;
    r.delta_variance = r.after.deviance_variance - r.before.deviance_variance;
    r.degenerate_core = !r.before.core_entropy || !r.after.core_entropy;
    if (!r.degenerate_core) r.delta_entropy = *r.after.core_entropy - *r.before.core_entropy;

    std::vector<double> deltas{r.delta_expected, r.delta_variance};
    if (r.delta_entropy) deltas.push_back(*r.delta_entropy);
    const bool none_up = std::all_of(deltas.begin(), deltas.end(), [](double d) { return d <= 0.0; });
    const bool some_down = std::any_of(deltas.begin(), deltas.end(), [](double d) { return d < 0.0; });
    r.homogenizing = none_up && some_down;
    return r;
}

} // namespace xeno
