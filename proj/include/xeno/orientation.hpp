#pragma once

#include "xeno/cores.hpp"
#include "xeno/structures.hpp"
#include "xeno/trajectory_model.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace xeno {

/// Per-structure deviation of a string from a reference core.
struct OrientationVector {
    std::vector<double> values;
    std::vector<double> reference;
};

OrientationVector orientation(std::span<const double> compliance, std::span<const double> core);
OrientationVector orientation(const ComplianceVector& v, const CoreVector& core);

double deviance(const OrientationVector& o, DiffMetric m);

/// Deviance of y relative to the core of `prompt`.
double prompted_deviance(const TrajectoryModel& model, const TokenString& prompt, const System& system,
                         DiffMetric m, const TokenString& y);

struct DevianceStats {
    double expected = 0.0;
    double variance = 0.0;
    DiffMetric metric = DiffMetric::l2norm;
    std::variant<ExactProvenance, MonteCarloProvenance> provenance;
};

/// E and Var of the prompted deviance by exact enumeration.
DevianceStats deviance_stats(const TrajectoryModel& model, const TokenString& prompt, const System& system,
                             DiffMetric m);

/// Sampling counterpart: the core is the sample mean of the same draws.
DevianceStats estimate_deviance_stats_mc(const TrajectoryModel& model, const TokenString& prompt,
                                         const System& system, DiffMetric m, std::size_t samples,
                                         std::uint64_t seed);

/// Strings ordered by prompted deviance, equal deviances grouped.
Preorder rank_strings(const TrajectoryModel& model, const TokenString& prompt, const System& system, DiffMetric m,
                      std::span<const TokenString> strings);

/// Rényi relative entropy (1/(q-1)) log sum_{i in supp p} p_i^q r_i^(1-q),
/// with the KL limit at q = 1 and max/min log-ratio limits at q = +-inf.
/// A zero r_i inside supp(p) yields +inf where the sum diverges.
double renyi_relative_entropy(std::span<const double> p, std::span<const double> r, double q);

struct HillDeviances {
    double excess;  ///< exp H_q(v || c): effective over-compliance
    double deficit; ///< exp H_q(c || v): effective under-compliance
};

/// Both inputs must be normalized (non-negative, summing to 1).
HillDeviances hill_deviances(std::span<const double> v_norm, std::span<const double> c_norm, double q);

/// Generalized deviance as an (orient, norm) pair.
struct DevianceFamily {
    std::string name;
    std::function<std::vector<double>(std::span<const double> compliance, std::span<const double> core)> orient;
    std::function<double(std::span<const double>)> norm;

    double operator()(std::span<const double> compliance, std::span<const double> core) const
    {
        return norm(orient(compliance, core));
    }
};

/// Subtraction orientation measured by a difference metric (the standard deviance).
DevianceFamily subtraction_deviance(DiffMetric m);

/// Orientation that stores both normalized vectors; the norm is a Hill deviance.
DevianceFamily hill_excess_deviance(double q);
DevianceFamily hill_deficit_deviance(double q);

/// One step of the per-prefix dynamics along a trajectory.
struct DynamicsState {
    std::size_t step;
    Symbol token;
    std::vector<double> core_state;      ///< core of x_k
    std::vector<double> accumulated;     ///< Λ(x_k) minus core of x_0
    std::vector<double> remaining;       ///< Λ(y) minus core of x_k
};

/// States for k = 0..T where x_k is the base prompt extended by the first k
/// symbols of y after it.
std::vector<DynamicsState> dynamics_trace(const TrajectoryModel& model, const System& system, const TokenString& y,
                                          const TokenString& base_prompt);

/// Plot-ready CSV: step,token, then phi_x.<name>,phi_y.<name>,phi_z.<name>
/// per structure.
std::string dynamics_csv(const Alphabet& alphabet, const System& system, std::span<const DynamicsState> trace);

struct HomogenizationSide {
    double expected_deviance;
    double deviance_variance;
    std::optional<double> core_entropy; ///< empty for a degenerate core
    std::vector<double> core;
};

struct HomogenizationReport {
    HomogenizationSide before;
    HomogenizationSide after;
    double delta_expected;
    double delta_variance;
    std::optional<double> delta_entropy;
    bool degenerate_core = false;
    bool homogenizing = false;
};

/// Two-snapshot comparator: deltas are after (b) minus before (a).
/// Homogenizing when every defined delta is <= 0 and one is < 0.
HomogenizationReport homogenization_report(const TrajectoryModel& before, const TrajectoryModel& after,
                                           const TokenString& prompt, const System& system, DiffMetric m,
                                           LogBase base = LogBase::natural);

} // namespace xeno
