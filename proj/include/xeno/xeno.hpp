#pragma once

#include "xeno/cores.hpp"
#include "xeno/orientation.hpp"
#include "xeno/structures.hpp"
#include "xeno/trajectory_model.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace xeno {

/// Every weight and temperature of the distribution- and trajectory-level
/// scores. All default to 1.
struct ScoreConfig {
    double lambda_E = 1.0;
    double lambda_Var = 1.0;
    double lambda_d0 = 1.0;
    double lambda_d1 = 1.0;
    double lambda_f0 = 1.0;
    double lambda_f1 = 1.0;
    double lambda_c0 = 1.0;
    double lambda_c1 = 1.0;
    double lambda_c2 = 1.0;
    double lambda_d = 1.0;
    double lambda_f = 1.0;
    double lambda_c = 1.0;
    double beta_rho = 1.0;
    double beta_r = 1.0;
    Aggregator aggregator{};
    DiffMetric metric = DiffMetric::l2norm;
    LogBase entropy_base = LogBase::natural;

    /// Throws ValidationError if a weight or temperature is negative or NaN.
    void validate() const;
};

/// Overrides on top of `base`; unknown keys are a ConfigError.
ScoreConfig load_score_config(const nlohmann::json& doc, ScoreConfig base = {});
nlohmann::ordered_json to_json(const ScoreConfig& cfg);

/// Target / avoid / conserve systems; any role may be absent.
struct ConstraintSystems {
    std::optional<System> target;
    std::optional<System> avoid;
    std::optional<System> conserve;

    bool empty() const noexcept { return !target && !avoid && !conserve; }
    /// Structure names must be disjoint across roles.
    void validate() const;
};

/// {"target": [records], "avoid": [...], "conserve": [...]}
ConstraintSystems load_constraints(const nlohmann::json& doc, const Alphabet& alphabet);

// --- distribution level ---------------------------------------------------

double score_explore(const CoreVector& core_w, const CoreVector& core_w0, DiffMetric m);
double score_diverge(const DevianceStats& stats, const ScoreConfig& cfg);

/// sign(core_i - core_j) in {-1, 0, +1}; exact zero is a tie.
int relative_order_sign(std::span<const double> core, std::size_t i, std::size_t j);

/// Fraction of pairs i < j whose relative-order sign differs; a tie is
/// different from a strict order.
double score_inverted(std::span<const double> core_w, std::span<const double> core_w0);
double score_inverted(const CoreVector& core_w, const CoreVector& core_w0);

/// Every term of the intervention score for one candidate.
struct ScoreBreakdown {
    CoreVector core_w;
    CoreVector core_w0;
    DevianceStats stats;
    double score_explore = 0.0;
    double score_diverge = 0.0;
    double rho_d = 0.0;
    std::optional<double> score_even; ///< empty when the core is degenerate
    double score_inverted = 0.0;
    double rho_f = 0.0;
    double rho_c = 0.0;
    double rho_chi = 0.0;
    std::vector<std::string> warnings;
};

ScoreBreakdown score_intervention(const TrajectoryModel& model_w, const TrajectoryModel& model_w0,
                                  const TokenString& prompt, const System& system,
                                  const ConstraintSystems& constraints, const ScoreConfig& cfg);

double diversity_score(const TrajectoryModel& model_w, const TrajectoryModel& model_w0, const TokenString& prompt,
                       const System& system, const ScoreConfig& cfg);

/// Degenerate cores drop the evenness term with a warning.
double fairness_score(const TrajectoryModel& model_w, const TrajectoryModel& model_w0, const TokenString& prompt,
                      const System& system, const ScoreConfig& cfg);

double constraint_score(const TrajectoryModel& model_w, const TrajectoryModel& model_w0, const TokenString& prompt,
                        const ConstraintSystems& constraints, const ScoreConfig& cfg);

double intervention_score(const TrajectoryModel& model_w, const TrajectoryModel& model_w0, const TokenString& prompt,
                          const System& system, const ConstraintSystems& constraints, const ScoreConfig& cfg);

/// Probabilities proportional to exp(beta * score); beta = +inf puts
/// uniform mass on the maximizers.
std::vector<double> boltzmann_weights(std::span<const double> scores, double beta);

/// Index of a candidate drawn from boltzmann_weights; deterministic per seed.
std::size_t sample_intervention_index(std::span<const double> scores, double beta, std::uint64_t seed);

const Intervention& sample_intervention(std::span<const Intervention> candidates, std::span<const double> scores,
                                        double beta, std::uint64_t seed);

struct WeightedString {
    TokenString string;
    double probability;
};

/// sum_w pi(w) p(y | prompt, w) over already-intervened models.
std::vector<WeightedString> mixture_distribution(std::span<const TrajectoryModel> models,
                                                 std::span<const double> weights, const TokenString& prompt);

// --- trajectory level -----------------------------------------------------

inline constexpr double kFairnessEpsilon = 1e-6;

/// v_i proportional to 1 / (core_i + eps), normalized to sum 1.
std::vector<double> fairness_weights(std::span<const double> core, double eps = kFairnessEpsilon);

/// Everything the trajectory rewards need, frozen against a baseline model.
struct RewardSpec {
    System system;
    ConstraintSystems constraints;
    TokenString prompt;
    ScoreConfig config;
    std::vector<double> core;          ///< baseline core of `system` at `prompt`
    std::vector<double> conserve_core; ///< baseline core of the conserve role
    std::vector<double> weights;       ///< fairness weights v
};

RewardSpec make_reward_spec(const TrajectoryModel& baseline, const TokenString& prompt, System system,
                            ConstraintSystems constraints, const ScoreConfig& cfg);

struct TrajectoryRewards {
    double deviance;   ///< r_d
    double fairness;   ///< r_f
    double constraint; ///< r_c
};

TrajectoryRewards trajectory_rewards(const TokenString& y, const RewardSpec& spec);

/// lambda_d r_d + lambda_f r_f + lambda_c r_c
double stay_reward(const TokenString& y, const RewardSpec& spec);

/// Reward tilt transform that uses the stay reward of `spec`.
RewardTilt make_reward_tilt(const RewardSpec& spec, double beta, std::string name = "stay_reward");

/// Candidate list: [{"name": ..., "transforms": [{"type": ..., ...}]}] with
/// types prepend_prompt (tokens), temperature (tau), token_bias (bias map)
/// and reward_tilt (beta). reward_tilt needs `spec`.
std::vector<Intervention> load_candidates(const nlohmann::json& doc, const RewardSpec* spec = nullptr);
std::vector<Intervention> load_candidates_file(const std::filesystem::path& path, const RewardSpec* spec = nullptr);

struct TiltedTrajectory {
    TokenString string;
    double baseline_probability;
    double reward;
    double probability;
};

/// Exact p(y) proportional to p(y | prompt) exp(beta r(y)) over the
/// enumerated continuations of `prompt`.
std::vector<TiltedTrajectory> tilted_distribution(const TrajectoryModel& model, const TokenString& prompt,
                                                  const RewardFn& reward, double beta);
std::vector<TiltedTrajectory> tilted_distribution(const TrajectoryModel& model, const RewardSpec& spec, double beta);

/// Inverse-CDF draws from an explicit distribution; draw i uses stream i.
std::vector<std::size_t> sample_categorical(std::span<const double> probabilities, std::uint64_t seed,
                                            std::size_t count);

/// Self-normalized importance sampling for models that cannot be
/// enumerated: draws from the baseline, weights by exp(beta r).
struct ImportanceSample {
    std::vector<TokenString> draws;
    std::vector<double> rewards;
    std::vector<double> weights; ///< normalized
    double effective_sample_size = 0.0;
};

ImportanceSample tilted_importance_sample(const TrajectoryModel& model, const TokenString& prompt,
                                          const RewardFn& reward, double beta, std::size_t samples,
                                          std::uint64_t seed);

// --- diversity / fairness trade-off ---------------------------------------

/// a Pareto-dominates b (maximization): no worse everywhere, better somewhere.
bool pareto_dominates(std::span<const double> a, std::span<const double> b);

struct ParetoCandidate {
    std::vector<double> core;
    double score_explore = 0.0;
    double score_diverge = 0.0;
    double rho_d = 0.0;
    double score_even = 0.0;
    double score_inverted = 0.0;
    double rho_f = 0.0;
};

struct ParetoReport {
    std::size_t n = 0;
    std::vector<double> baseline;
    ParetoCandidate diversity_optimal; ///< w_d: core (0, ..., 0, 1)
    ParetoCandidate fairness_optimal;  ///< w_f: core (1/n, ..., 1/n)
    bool diversity_wins_rho_d = false;
    bool fairness_wins_rho_f = false;
    bool non_dominance = false;
    bool baseline_strictly_decreasing = false;
    std::string conventions;
};

/// Builds w_d and w_f as single-trajectory models with tabulated
/// structures and scores them with l2raw, natural log and unit weights.
/// Throws DomainError unless core_n < 1/n < core_1.
ParetoReport pareto_demo(std::span<const double> baseline_core);

} // namespace xeno
