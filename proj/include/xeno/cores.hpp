#pragma once

#include "xeno/structures.hpp"
#include "xeno/trajectory_model.hpp"

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace xeno {

struct ExactProvenance {};

struct MonteCarloProvenance {
    std::size_t samples = 0;
    std::vector<double> standard_error;
};

/// Expected compliance of a system under a (prompted, possibly intervened)
/// model.
struct CoreVector {
    std::vector<double> values;
    std::variant<ExactProvenance, MonteCarloProvenance> provenance;
    TokenString prompt;
    std::string intervention = "identity";

    bool exact() const noexcept { return std::holds_alternative<ExactProvenance>(provenance); }
    std::size_t size() const noexcept { return values.size(); }
};

/// Escort power-mean parameters; either may be infinite.
struct EscortParams {
    double q = 1.0;
    double r = 1.0;
};

enum class LogBase { natural, two };

std::string_view to_string(LogBase base);
LogBase parse_log_base(std::string_view text);

/// Trajectories below `prompt` with positive probability. A terminal
/// prompt is its own (only) continuation.
std::vector<Trajectory> continuation_support(const TrajectoryModel& model, const TokenString& prompt);

double structure_core(const TrajectoryModel& model, const TokenString& prompt, const Structure& s);

CoreVector system_core(const TrajectoryModel& model, const TokenString& prompt, const System& system,
                       std::string intervention = "identity");

/// Plain Monte Carlo mean of the compliance vector with per-component
/// standard errors; draw i uses stream derive_seed(seed, i).
CoreVector estimate_core_mc(const TrajectoryModel& model, const TokenString& prompt, const System& system,
                            std::size_t samples, std::uint64_t seed);

/// ( sum p^r a^q / sum p^r )^(1/q) over the support, with the limit
/// conventions: r = 0 uniform over the support, r = +inf uniform over the
/// modes (probability ties within 1e-12), q = 0 geometric mean, q = +-inf
/// max / min over the escort support.
double generalized_core(const TrajectoryModel& model, const TokenString& prompt, const Structure& s,
                        EscortParams params);

/// Escort power mean of explicit (probability, compliance) pairs.
double escort_power_mean(std::span<const double> probabilities, std::span<const double> compliances,
                         EscortParams params);

inline constexpr double kModeTolerance = 1e-12;

/// Components divided by their sum. Throws DomainError for an all-zero core.
std::vector<double> normalized_core(std::span<const double> core);
std::vector<double> normalized_core(const CoreVector& core);

/// Shannon entropy of the normalized core (0 log 0 = 0).
double core_entropy(std::span<const double> core, LogBase base = LogBase::natural);
double core_entropy(const CoreVector& core, LogBase base = LogBase::natural);

/// Total preorder: groups of indices in ascending order of value, ties
/// (exact equality) grouped, indices ascending within a group.
struct Preorder {
    std::vector<std::vector<std::size_t>> groups;
};

Preorder rank_structures(std::span<const double> core);
Preorder rank_structures(const CoreVector& core);
Preorder rank_by_value(std::span<const double> values);

} // namespace xeno
