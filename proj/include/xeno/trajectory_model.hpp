#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace xeno {

/// A symbol of the token alphabet. Non-negative values index the ordinary
/// tokens; the two markers are negative so that `eos` sorts before every
/// token (enumeration visits shorter strings first).
enum class Symbol : std::int32_t { eos = -2, bos = -1 };

constexpr Symbol token_symbol(std::size_t index) noexcept
{
    return static_cast<Symbol>(static_cast<std::int32_t>(index));
}

constexpr bool is_marker(Symbol s) noexcept
{
    return s == Symbol::bos || s == Symbol::eos;
}

inline constexpr std::string_view kBosName = "<bos>";
inline constexpr std::string_view kEosName = "<eos>";

/// Ordered, duplicate-free token set plus the start/end markers.
class Alphabet {
public:
    explicit Alphabet(std::vector<std::string> tokens);

    std::size_t size() const noexcept { return tokens_.size(); }
    std::span<const std::string> tokens() const noexcept { return tokens_; }

    /// Name of any symbol, markers included.
    std::string_view name(Symbol s) const;

    /// Resolves a token or marker name; nullopt if unknown.
    std::optional<Symbol> find(std::string_view name) const;

    /// Like find() but throws ValidationError on unknown names.
    Symbol symbol(std::string_view name) const;

    bool operator==(const Alphabet& other) const { return tokens_ == other.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::map<std::string, Symbol, std::less<>> index_;
};

/// A string of the model: starts with bos, may end with eos.
class TokenString {
public:
    /// The empty string ⊥.
    TokenString() : symbols_{Symbol::bos} {}

    /// Validates marker placement. A leading bos is added when absent.
    static TokenString from_symbols(std::vector<Symbol> symbols);

    std::span<const Symbol> symbols() const noexcept { return symbols_; }
    std::size_t size() const noexcept { return symbols_.size(); }
    Symbol back() const noexcept { return symbols_.back(); }
    bool terminal() const noexcept { return symbols_.back() == Symbol::eos; }

    /// Number of ordinary tokens (markers excluded).
    std::size_t content_length() const noexcept
    {
        return symbols_.size() - 1 - (terminal() ? 1 : 0);
    }

    /// Appends one symbol; throws if this string is already terminal.
    TokenString extended(Symbol s) const;

    /// The prefix made of the first `count` symbols (count >= 1).
    TokenString prefix(std::size_t count) const;

    bool is_prefix_of(const TokenString& other) const noexcept;

    auto operator<=>(const TokenString&) const = default;
    bool operator==(const TokenString&) const = default;

private:
    std::vector<Symbol> symbols_;
};

/// Parses whitespace-separated token names. A leading "<bos>" is optional,
/// "<eos>" may only appear last.
TokenString parse_string(const Alphabet& alphabet, std::string_view text);

/// Parses a list of token names (same rules as parse_string).
TokenString parse_tokens(const Alphabet& alphabet, std::span<const std::string> names);

/// "<bos> a b <eos>"
std::string format_string(const Alphabet& alphabet, const TokenString& s);

/// Ordinary tokens joined by single spaces, markers dropped: "a b".
std::string detokenize(const Alphabet& alphabet, const TokenString& s);

struct Outcome {
    Symbol symbol;
    double probability;
};

/// Next-symbol distribution at one prefix, sorted by symbol.
using NextTokenDistribution = std::vector<Outcome>;

using NextTokenFn = std::function<NextTokenDistribution(const TokenString&)>;

using BranchMap = std::map<TokenString, NextTokenDistribution>;

/// Finite autoregressive generator over an Alphabet.
///
/// Two storage forms share one interface. The explicit (trie-shaped) form
/// maps every reachable non-terminal prefix to its next-symbol distribution
/// and supports exact enumeration. The callback form only answers next()
/// queries and therefore only supports sampling-based estimators.
///
/// Instances are immutable and cheap to copy.
class TrajectoryModel {
public:
    static constexpr double kProbabilityTolerance = 1e-9;

    /// Validates every invariant; throws ValidationError.
    static TrajectoryModel from_branches(Alphabet alphabet, std::size_t max_len, BranchMap branches);

    static TrajectoryModel from_callback(Alphabet alphabet, std::size_t max_len, NextTokenFn next);

    const Alphabet& alphabet() const noexcept { return *alphabet_; }

    /// Maximum number of ordinary tokens in any string of the model.
    std::size_t max_len() const noexcept { return max_len_; }

    bool enumerable() const noexcept { return branches_ != nullptr; }

    /// Explicit branch at `prefix`, or nullptr (also for callback models).
    const NextTokenDistribution* find_branch(const TokenString& prefix) const;

    /// Next-symbol distribution at a non-terminal prefix. For callback
    /// models the returned distribution is validated on every call.
    NextTokenDistribution next(const TokenString& prefix) const;

    /// Throws NonEnumerableError for callback models.
    const BranchMap& branches() const;

private:
    TrajectoryModel() = default;

    std::shared_ptr<const Alphabet> alphabet_;
    std::size_t max_len_ = 0;
    std::shared_ptr<const BranchMap> branches_;
    NextTokenFn next_;
};

/// Checks a single distribution (support symbols, non-negativity, unit sum).
void validate_distribution(const Alphabet& alphabet, const NextTokenDistribution& dist,
                           std::string_view where);

/// Model-spec document: {"tokens": [...], "max_len": n, "branches": {prefix: {token: p}}}.
TrajectoryModel load_model(const nlohmann::json& doc);
TrajectoryModel load_model_file(const std::filesystem::path& path);
nlohmann::json model_to_json(const TrajectoryModel& model);

/// Probability that generation continues from `prompt` to the terminal
/// string `y`, computed as a sum of branch log-probabilities.
double trajectory_log_probability(const TrajectoryModel& model, const TokenString& prompt,
                                  const TokenString& y);
double trajectory_probability(const TrajectoryModel& model, const TokenString& prompt,
                              const TokenString& y);

struct Trajectory {
    TokenString string;
    double probability;
    double log_probability;
};

/// Every positive-probability terminal extension of `prompt`, in
/// lexicographic symbol order (eos before tokens).
std::vector<Trajectory> enumerate_trajectories(const TrajectoryModel& model, const TokenString& prompt);

/// Ancestral sampling; deterministic given (model, prompt, seed).
TokenString sample_trajectory(const TrajectoryModel& model, const TokenString& prompt, std::uint64_t seed);

/// Draw i uses the stream derive_seed(seed, i), so any partition of the
/// batch reproduces the same draws.
std::vector<TokenString> sample_trajectories(const TrajectoryModel& model, const TokenString& prompt,
                                             std::uint64_t seed, std::size_t count);

// --- interventions --------------------------------------------------------

/// Conditions the model on a hidden prefix: the new root behaves like the
/// old prefix ⊥+tokens and generated strings exclude the prompt.
struct PrependPrompt {
    std::vector<std::string> tokens;
};

/// Raises each branch to the power 1/tau and renormalizes.
struct Temperature {
    double tau;
};

/// Adds a log-probability bias per token name ("<eos>" allowed) and
/// renormalizes every branch.
struct TokenBias {
    std::map<std::string, double> bias;
};

using RewardFn = std::function<double(const TokenString&)>;

/// Exponential tilt p(y|prompt) * exp(beta * reward(y)) over the subtree
/// rooted at `prompt`, materialized exactly as a new explicit model.
struct RewardTilt {
    std::string reward_name;
    TokenString prompt;
    RewardFn reward;
    double beta;
};

using Transform = std::variant<PrependPrompt, Temperature, TokenBias, RewardTilt>;

/// Ordered transform list; applied in document order. Empty = identity.
struct Intervention {
    std::string name;
    std::vector<Transform> transforms;

    bool identity() const noexcept { return transforms.empty(); }
};

TrajectoryModel apply_intervention(const TrajectoryModel& model, const Intervention& w);

/// Short text identifier, e.g. "temperature(0.5);token_bias(a:+1)".
std::string describe(const Intervention& w);

} // namespace xeno
