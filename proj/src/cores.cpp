#include "xeno/cores.hpp"

#include "xeno/error.hpp"
#include "xeno/numeric.hpp"
#include "xeno/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace xeno {

std::string_view to_string(LogBase base)
{
    return base == LogBase::natural ? "e" : "2";
}

LogBase parse_log_base(std::string_view text)
{
    if (text == "e" || text == "natural" || text == "nats") return LogBase::natural;
    if (text == "2" || text == "bits") return LogBase::two;
    throw ConfigError("unknown entropy base '" + std::string(text) + "' (expected e or 2)");
}

std::vector<Trajectory> continuation_support(const TrajectoryModel& model, const TokenString& prompt)
{
    if (prompt.terminal()) return {{prompt, 1.0, 0.0}};
    return enumerate_trajectories(model, prompt);
}

double structure_core(const TrajectoryModel& model, const TokenString& prompt, const Structure& s)
{
    const auto support = continuation_support(model, prompt);
    CompensatedSum acc;
    for (const auto& y : support) acc.add(y.probability * s.evaluate(y.string));
    return std::clamp(acc.value(), 0.0, 1.0);
}

CoreVector system_core(const TrajectoryModel& model, const TokenString& prompt, const System& system,
                       std::string intervention)
{
    const auto support = continuation_support(model, prompt);
    std::vector<CompensatedSum> acc(system.size());
    for (const auto& y : support) {
        for (std::size_t i = 0; i < system.size(); ++i) acc[i].add(y.probability * system[i].evaluate(y.string));
    }
    CoreVector core;
    core.prompt = prompt;
    core.intervention = std::move(intervention);
    for (const auto& a : acc) core.values.push_back(std::clamp(a.value(), 0.0, 1.0));
    return core;
}

CoreVector estimate_core_mc(const TrajectoryModel& model, const TokenString& prompt, const System& system,
                            std::size_t samples, std::uint64_t seed)
{
    if (samples < 2) throw DomainError("Monte Carlo core needs at least 2 samples");
    const auto draws = sample_trajectories(model, prompt, seed, samples);
    const std::size_t n = system.size();
    std::vector<CompensatedSum> sum(n);
    std::vector<std::vector<double>> values(n);
    for (const auto& y : draws) {
        const auto v = evaluate_system(system, y);
        for (std::size_t i = 0; i < n; ++i) {
            sum[i].add(v.values[i]);
            values[i].push_back(v.values[i]);
        }
    }
    const auto count = static_cast<double>(samples);
    CoreVector core;
    core.prompt = prompt;
    MonteCarloProvenance mc;
    mc.samples = samples;
    for (std::size_t i = 0; i < n; ++i) {
        const double mean = sum[i].value() / count;
        CompensatedSum sq;
        for (double x : values[i]) sq.add((x - mean) * (x - mean));
        const double var = sq.value() / (count - 1.0);
        core.values.push_back(mean);
        mc.standard_error.push_back(std::sqrt(var / count));
    }
    core.provenance = std::move(mc);
    return core;
}

double escort_power_mean(std::span<const double> probabilities, std::span<const double> compliances,
                         EscortParams params)
{
    const auto [q, r] = params;
    if (probabilities.size() != compliances.size()) throw DomainError("probability/compliance size mismatch");
    if (std::isnan(q) || std::isnan(r) || r < 0.0) throw DomainError("escort parameters need q real and r >= 0");

    std::vector<double> p;
    std::vector<double> a;
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        if (probabilities[i] > 0.0) {
            p.push_back(probabilities[i]);
            a.push_back(compliances[i]);
        }
    }
    if (p.empty()) throw DomainError("escort power mean over an empty support");
    if (q <= 0.0) {
        for (double v : a) {
            if (v <= 0.0) throw DomainError("escort power mean with q <= 0 needs positive compliance on the support");
        }
    }

    if (q == 1.0 && r == 1.0) {
        CompensatedSum num;
        CompensatedSum den;
        for (std::size_t i = 0; i < p.size(); ++i) {
            num.add(p[i] * a[i]);
            den.add(p[i]);
        }
        return num.value() / den.value();
    }

    // Escort log-weights, normalized.
    std::vector<double> log_w(p.size());
    if (std::isinf(r)) {
        const double top = *std::max_element(p.begin(), p.end());
        for (std::size_t i = 0; i < p.size(); ++i)
            log_w[i] = (top - p[i] <= kModeTolerance) ? 0.0 : -std::numeric_limits<double>::infinity();
    } else {
        for (std::size_t i = 0; i < p.size(); ++i) log_w[i] = r * std::log(p[i]);
    }
    const double z = log_sum_exp(log_w);
    for (double& lw : log_w) lw -= z;

    if (std::isinf(q)) {
        double best = q > 0 ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (!std::isfinite(log_w[i])) continue;
            best = q > 0 ? std::max(best, a[i]) : std::min(best, a[i]);
        }
        return best;
    }
    if (q == 0.0) {
        CompensatedSum acc;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (std::isfinite(log_w[i])) acc.add(std::exp(log_w[i]) * std::log(a[i]));
        }
        return std::exp(acc.value());
    }
    if (q == 1.0) {
        CompensatedSum acc;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (std::isfinite(log_w[i])) acc.add(std::exp(log_w[i]) * a[i]);
        }
        return acc.value();
    }
    // (1/q) log sum w a^q, evaluated as a log-sum-exp so |q| can be large.
    std::vector<double> terms;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!std::isfinite(log_w[i])) continue;
        if (a[i] <= 0.0) continue; // q > 0 here; zero compliance contributes 0
        terms.push_back(log_w[i] + q * std::log(a[i]));
    }
    if (terms.empty()) return 0.0;
    return std::exp(log_sum_exp(terms) / q);
}

double generalized_core(const TrajectoryModel& model, const TokenString& prompt, const Structure& s,
                        EscortParams params)
{
    const auto support = continuation_support(model, prompt);
    std::vector<double> p;
    std::vector<double> a;
    for (const auto& y : support) {
        p.push_back(y.probability);
        a.push_back(s.evaluate(y.string));
    }
    const double v = escort_power_mean(p, a, params);
    const auto [lo, hi] = std::minmax_element(a.begin(), a.end());
    return std::clamp(v, *lo, *hi);
}

std::vector<double> normalized_core(std::span<const double> core)
{
    if (core.empty()) throw DomainError("cannot normalize an empty core");
    const double total = compensated_sum(core);
    if (!(total > 0.0)) throw DomainError("degenerate core: components sum to zero, normalization undefined");
    std::vector<double> out;
    out.reserve(core.size());
    for (double c : core) out.push_back(c / total);
    return out;
}

std::vector<double> normalized_core(const CoreVector& core)
{
    return normalized_core(core.values);
}

double core_entropy(std::span<const double> core, LogBase base)
{
    const auto p = normalized_core(core);
    CompensatedSum acc;
    for (double x : p) {
        if (x > 0.0) acc.add(-x * std::log(x));
    }
    const double h = std::max(0.0, acc.value());
    return base == LogBase::natural ? h : h / std::log(2.0);
}

double core_entropy(const CoreVector& core, LogBase base)
{
    return core_entropy(core.values, base);
}

Preorder rank_by_value(std::span<const double> values)
{
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    Preorder out;
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (k == 0 || values[order[k]] != values[order[k - 1]]) out.groups.emplace_back();
        out.groups.back().push_back(order[k]);
    }
    return out;
}

Preorder rank_structures(std::span<const double> core)
{
    return rank_by_value(core);
}

Preorder rank_structures(const CoreVector& core)
{
    return rank_by_value(core.values);
}

} // namespace xeno
