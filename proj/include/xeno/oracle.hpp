#pragma once

#include "xeno/structures.hpp"
#include "xeno/trajectory_model.hpp"

#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace xeno::oracle {

/// Reference implementations by direct enumeration in exact rational
/// arithmetic. Nothing here calls into the cores, orientation or xeno
/// modules, so the two code paths can check each other.

using Rational = boost::multiprecision::cpp_rational;

/// The rational with the shortest decimal expansion that round-trips to
/// x, so 0.1 read from a document becomes exactly 1/10.
Rational to_rational(double x);
double to_double(const Rational& r);

struct ExactTrajectory {
    TokenString string;
    Rational probability;
};

/// Positive-probability terminal continuations of `prompt`, found by an
/// explicit-stack traversal of the branch map. Branch probabilities are read
/// as their shortest decimals and each branch is renormalized exactly.
std::vector<ExactTrajectory> brute_force_distribution(const TrajectoryModel& model, const TokenString& prompt);

using StringFunction = std::function<double(const TokenString&)>;

Rational brute_force_expectation_exact(const TrajectoryModel& model, const TokenString& prompt,
                                       const StringFunction& f);
double brute_force_expectation(const TrajectoryModel& model, const TokenString& prompt, const StringFunction& f);

struct GiniSimpsonResult {
    double mu;
    double expected_abs_deviation; ///< E|α - μ|
    double variance;               ///< Var α
    double gini_simpson;           ///< 2 μ (1 - μ)
    bool holds;                    ///< both identities hold exactly
};

/// Builds ⊥ -> {a: μ, b: 1 - μ} with the binary structure α_a.
GiniSimpsonResult gini_simpson_check(double mu);

struct ValiditySet {
    std::set<TokenString> valid;
};

struct IivResult {
    double core;
    double err;
    Rational core_exact;
    Rational err_exact;
    bool holds; ///< core = 1 - err in exact arithmetic
};

IivResult iiv_check(const TrajectoryModel& model, const ValiditySet& vs);

struct LanguageSet {
    std::set<TokenString> members;
};

struct ConsistencyBreadth {
    bool consistent; ///< membership core is exactly 1
    bool breadth;    ///< every member has positive probability
    double core;
};

ConsistencyBreadth consistency_breadth_check(const TrajectoryModel& model, const LanguageSet& language);

/// Driving the membership core of a language K to 1 need not change the
/// deviance of an unrelated system Λ_m. Two models over {a, b, c, d}: the
/// first token decides α_m, the second decides membership in K.
struct RelativeHomogenizationResult {
    Rational k_core_before;
    Rational k_core_after;
    Rational k_expected_deviance_after;
    Rational m_expected_deviance_before;
    Rational m_expected_deviance_after;
    Rational m_variance_before;
    Rational m_variance_after;
    bool holds;
};

RelativeHomogenizationResult structure_relative_homogenization();

/// Expected absolute deviation and variance of a structure around its
/// exact core, by brute force (singleton abs-metric deviance statistics).
struct ExactDevianceStats {
    Rational core;
    Rational expected_abs;
    Rational variance;
};

ExactDevianceStats brute_force_singleton_stats(const TrajectoryModel& model, const TokenString& prompt,
                                               const Structure& s);

/// Random explicit model: 1..max_tokens tokens, depth 1..max_depth,
/// probabilities on a 1/1000 grid so rational sums are exact.
TrajectoryModel random_tree_model(std::uint64_t seed, std::size_t max_tokens = 4, std::size_t max_depth = 5);

/// 1..max_structures indicator-style structures (token, bigram,
/// membership) plus an occasional tabulated one.
System random_indicator_system(const TrajectoryModel& model, std::uint64_t seed, std::size_t max_structures = 3);

} // namespace xeno::oracle
