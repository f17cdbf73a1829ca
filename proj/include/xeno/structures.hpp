#pragma once

#include "xeno/trajectory_model.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace xeno {

/// Scores a detokenized string. Implementations return a value that
/// should lie in [0, 1]; Structure clamps tiny excursions.
class ComplianceCallback {
public:
    virtual ~ComplianceCallback() = default;
    virtual double operator()(std::string_view text) = 0;

    /// Reentrant callbacks may be invoked concurrently. Others are
    /// serialized by the owning Structure.
    virtual bool reentrant() const { return false; }
};

/// In-process callback around a plain function.
class FunctionCallback final : public ComplianceCallback {
public:
    explicit FunctionCallback(std::function<double(std::string_view)> fn, bool reentrant = false)
        : fn_(std::move(fn)), reentrant_(reentrant)
    {
    }
    double operator()(std::string_view text) override { return fn_(text); }
    bool reentrant() const override { return reentrant_; }

private:
    std::function<double(std::string_view)> fn_;
    bool reentrant_;
};

/// Runs a command per evaluation: the detokenized string is written to its
/// stdin and the first decimal on its stdout is the compliance. A non-zero
/// exit status or a timeout is a CallbackError.
class SubprocessCallback final : public ComplianceCallback {
public:
    SubprocessCallback(std::vector<std::string> argv, std::chrono::milliseconds timeout);
    double operator()(std::string_view text) override;

    const std::vector<std::string>& argv() const noexcept { return argv_; }

private:
    std::vector<std::string> argv_;
    std::chrono::milliseconds timeout_;
};

enum class StructureKind {
    token_indicator,
    ngram_indicator,
    regex_match,
    tabulated,
    membership_set,
    weighted_combination,
    external_callback,
};

std::string_view to_string(StructureKind kind);

/// A compliance function mapping every string of an alphabet into [0, 1].
/// Indicator kinds match against the string as given, so prefixes are
/// scored on the tokens generated so far.
class Structure {
public:
    static constexpr double kCallbackSlack = 1e-6;

    struct TokenIndicator {
        Symbol token;
    };
    struct NgramIndicator {
        std::vector<Symbol> ngram;
    };
    struct RegexMatch {
        std::string pattern;
        std::shared_ptr<const std::regex> regex;
    };
    struct Tabulated {
        std::map<TokenString, double> table;
        std::optional<double> fallback;
    };
    struct MembershipSet {
        std::set<TokenString> members;
    };
    struct WeightedCombination {
        std::vector<std::pair<double, std::shared_ptr<const Structure>>> parts;
    };
    struct ExternalCallback {
        std::shared_ptr<ComplianceCallback> callback;
        std::shared_ptr<std::mutex> serial;
    };
    using Params = std::variant<TokenIndicator, NgramIndicator, RegexMatch, Tabulated, MembershipSet,
                                WeightedCombination, ExternalCallback>;

    static Structure token_indicator(std::string name, const Alphabet& alphabet, std::string_view token);
    static Structure ngram_indicator(std::string name, const Alphabet& alphabet, std::span<const std::string> ngram);
    static Structure regex_match(std::string name, const Alphabet& alphabet, std::string pattern);
    static Structure tabulated(std::string name, const Alphabet& alphabet, std::map<TokenString, double> table,
                               std::optional<double> fallback);
    static Structure membership_set(std::string name, const Alphabet& alphabet, std::set<TokenString> members);
    static Structure weighted_combination(std::string name, const Alphabet& alphabet,
                                          std::vector<std::pair<double, Structure>> parts);
    static Structure external_callback(std::string name, const Alphabet& alphabet,
                                       std::shared_ptr<ComplianceCallback> callback);

    const std::string& name() const noexcept { return name_; }
    StructureKind kind() const noexcept { return static_cast<StructureKind>(params_.index()); }
    const Params& params() const noexcept { return params_; }
    const Alphabet& alphabet() const noexcept { return *alphabet_; }

    /// Compliance of x in [0, 1].
    double evaluate(const TokenString& x) const;

private:
    Structure(std::string name, const Alphabet& alphabet, Params params);

    std::string name_;
    std::shared_ptr<const Alphabet> alphabet_;
    Params params_;
};

/// Per-structure compliance of one string, aligned with a System.
struct ComplianceVector {
    std::vector<double> values;
};

/// Ordered list of structures with unique names.
class System {
public:
    explicit System(std::vector<Structure> structures);

    std::size_t size() const noexcept { return structures_.size(); }
    const Structure& operator[](std::size_t i) const { return structures_[i]; }
    std::span<const Structure> structures() const noexcept { return structures_; }
    std::vector<std::string> names() const;

private:
    std::vector<Structure> structures_;
};

double evaluate_structure(const Structure& s, const TokenString& x);
ComplianceVector evaluate_system(const System& system, const TokenString& x);

/// Scalar summary of a vector in [0,1]^n.
struct Aggregator {
    enum class Kind { mean, min, max, pnorm } kind = Kind::mean;
    double p = 2.0; ///< exponent for pnorm: (sum |v|^p / n)^(1/p)
};

/// Size of a difference vector. All but l2raw map [-1,1]^n into [0,1].
enum class DiffMetric { abs_mean, l2norm, linf, l2raw };

std::string to_string(const Aggregator& agg);
std::string_view to_string(DiffMetric m);
Aggregator parse_aggregator(std::string_view text);
DiffMetric parse_diff_metric(std::string_view text);

/// False only for l2raw, whose values may exceed 1.
constexpr bool unit_ranged(DiffMetric m) noexcept
{
    return m != DiffMetric::l2raw;
}

double system_score(std::span<const double> v, const Aggregator& agg);
double system_score(const ComplianceVector& v, const Aggregator& agg);

/// Norm of a difference vector (the deviation itself, not two operands).
double metric_norm(std::span<const double> d, DiffMetric m);

double difference_score(std::span<const double> a, std::span<const double> b, DiffMetric m);
double difference_score(const ComplianceVector& a, const ComplianceVector& b, DiffMetric m);

/// System-spec document: a list of {name, kind, params} records (or an
/// object with such a list under "structures").
System load_system(const nlohmann::json& doc, const Alphabet& alphabet);
System load_system_file(const std::filesystem::path& path, const Alphabet& alphabet);
Structure load_structure(const nlohmann::json& record, const Alphabet& alphabet);

} // namespace xeno
