#include "xeno/trajectory_model.hpp"

#include "xeno/error.hpp"
#include "xeno/numeric.hpp"
#include "xeno/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace xeno {

// --- Alphabet -------------------------------------------------------------

Alphabet::Alphabet(std::vector<std::string> tokens) : tokens_(std::move(tokens))
{
    if (tokens_.empty()) throw ValidationError("alphabet must contain at least one token");
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        const auto& t = tokens_[i];
        if (t.empty()) throw ValidationError("alphabet token must be non-empty");
        if (t == kBosName || t == kEosName)
            throw ValidationError("alphabet token '" + t + "' collides with a marker");
        if (t.find_first_of(" \t\r\n") != std::string::npos)
            throw ValidationError("alphabet token '" + t + "' contains whitespace");
        if (!index_.emplace(t, token_symbol(i)).second)
            throw ValidationError("duplicate alphabet token '" + t + "'");
    }
}

std::string_view Alphabet::name(Symbol s) const
{
    if (s == Symbol::bos) return kBosName;
    if (s == Symbol::eos) return kEosName;
    const auto i = static_cast<std::int32_t>(s);
    if (i < 0 || static_cast<std::size_t>(i) >= tokens_.size())
        throw ValidationError("symbol id " + std::to_string(i) + " outside alphabet");
    return tokens_[static_cast<std::size_t>(i)];
}

std::optional<Symbol> Alphabet::find(std::string_view name) const
{
    if (name == kBosName) return Symbol::bos;
    if (name == kEosName) return Symbol::eos;
    if (auto it = index_.find(name); it != index_.end()) return it->second;
    return std::nullopt;
}

Symbol Alphabet::symbol(std::string_view name) const
{
    if (auto s = find(name)) return *s;
    throw ValidationError("unknown token '" + std::string(name) + "'");
}

// --- TokenString ----------------------------------------------------------

TokenString TokenString::from_symbols(std::vector<Symbol> symbols)
{
    if (symbols.empty() || symbols.front() != Symbol::bos) symbols.insert(symbols.begin(), Symbol::bos);
    for (std::size_t i = 1; i < symbols.size(); ++i) {
        if (symbols[i] == Symbol::bos) throw ValidationError("<bos> may only appear at position 0");
        if (symbols[i] == Symbol::eos && i + 1 != symbols.size())
            throw ValidationError("<eos> may only appear at the end of a string");
    }
    TokenString s;
    s.symbols_ = std::move(symbols);
    return s;
}

TokenString TokenString::extended(Symbol s) const
{
    if (terminal()) throw ValidationError("cannot extend a terminal string");
    if (s == Symbol::bos) throw ValidationError("<bos> may only appear at position 0");
    TokenString out = *this;
    out.symbols_.push_back(s);
    return out;
}

TokenString TokenString::prefix(std::size_t count) const
{
    if (count == 0 || count > symbols_.size()) throw DomainError("prefix length out of range");
    TokenString out;
    out.symbols_.assign(symbols_.begin(), symbols_.begin() + static_cast<std::ptrdiff_t>(count));
    return out;
}

bool TokenString::is_prefix_of(const TokenString& other) const noexcept
{
    return symbols_.size() <= other.symbols_.size() &&
           std::equal(symbols_.begin(), symbols_.end(), other.symbols_.begin());
}

TokenString parse_tokens(const Alphabet& alphabet, std::span<const std::string> names)
{
    std::vector<Symbol> symbols;
    symbols.reserve(names.size() + 1);
    for (const auto& n : names) symbols.push_back(alphabet.symbol(n));
    return TokenString::from_symbols(std::move(symbols));
}

TokenString parse_string(const Alphabet& alphabet, std::string_view text)
{
    std::istringstream in{std::string(text)};
    std::vector<std::string> names;
    for (std::string word; in >> word;) names.push_back(word);
    return parse_tokens(alphabet, names);
}

std::string format_string(const Alphabet& alphabet, const TokenString& s)
{
    std::string out;
    for (Symbol sym : s.symbols()) {
        if (!out.empty()) out += ' ';
        out += alphabet.name(sym);
    }
    return out;
}

std::string detokenize(const Alphabet& alphabet, const TokenString& s)
{
    std::string out;
    for (Symbol sym : s.symbols()) {
        if (is_marker(sym)) continue;
        if (!out.empty()) out += ' ';
        out += alphabet.name(sym);
    }
    return out;
}

// --- TrajectoryModel ------------------------------------------------------

void validate_distribution(const Alphabet& alphabet, const NextTokenDistribution& dist, std::string_view where)
{
    if (dist.empty()) throw ValidationError("empty branch at '" + std::string(where) + "'");
    CompensatedSum total;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        const auto& [sym, p] = dist[i];
        if (sym == Symbol::bos) throw ValidationError("<bos> in branch at '" + std::string(where) + "'");
        (void)alphabet.name(sym);
        if (i > 0 && !(dist[i - 1].symbol < sym))
            throw ValidationError("branch at '" + std::string(where) + "' is unsorted or has duplicates");
        if (!std::isfinite(p) || p < 0.0)
            throw ValidationError("invalid probability in branch at '" + std::string(where) + "'");
        total.add(p);
    }
    if (std::abs(total.value() - 1.0) > TrajectoryModel::kProbabilityTolerance) {
        throw ValidationError("branch at '" + std::string(where) + "' sums to " + format_double(total.value()) +
                              ", expected 1");
    }
}

TrajectoryModel TrajectoryModel::from_branches(Alphabet alphabet, std::size_t max_len, BranchMap branches)
{
    if (max_len == 0) throw ValidationError("max_len must be positive");
    const TokenString root;
    if (!branches.contains(root)) throw ValidationError("model has no root branch");

    for (const auto& [prefix, dist] : branches) {
        const auto where = format_string(alphabet, prefix);
        if (prefix.terminal()) throw ValidationError("branch defined at terminal string '" + where + "'");
        if (prefix.content_length() > max_len)
            throw ValidationError("prefix '" + where + "' is longer than max_len");
        validate_distribution(alphabet, dist, where);
        for (const auto& [sym, p] : dist) {
            if (p <= 0.0 || sym == Symbol::eos) continue;
            if (prefix.content_length() == max_len) {
                throw ValidationError("path through '" + where + "' exceeds max_len " + std::to_string(max_len) +
                                      " without <eos> (non-terminating)");
            }
            if (!branches.contains(prefix.extended(sym))) {
                throw ValidationError("prefix '" + format_string(alphabet, prefix.extended(sym)) +
                                      "' is reachable but has no branch");
            }
        }
    }

    TrajectoryModel m;
    m.alphabet_ = std::make_shared<const Alphabet>(std::move(alphabet));
    m.max_len_ = max_len;
    m.branches_ = std::make_shared<const BranchMap>(std::move(branches));
    return m;
}

TrajectoryModel TrajectoryModel::from_callback(Alphabet alphabet, std::size_t max_len, NextTokenFn next)
{
    if (max_len == 0) throw ValidationError("max_len must be positive");
    if (!next) throw ValidationError("callback model needs a next-token function");
    TrajectoryModel m;
    m.alphabet_ = std::make_shared<const Alphabet>(std::move(alphabet));
    m.max_len_ = max_len;
    m.next_ = std::move(next);
    return m;
}

const NextTokenDistribution* TrajectoryModel::find_branch(const TokenString& prefix) const
{
    if (!branches_) return nullptr;
    auto it = branches_->find(prefix);
    return it == branches_->end() ? nullptr : &it->second;
}

NextTokenDistribution TrajectoryModel::next(const TokenString& prefix) const
{
    if (prefix.terminal()) throw DomainError("terminal string has no continuation");
    if (branches_) {
        if (const auto* b = find_branch(prefix)) return *b;
        throw DomainError("prefix '" + format_string(*alphabet_, prefix) + "' has no defined branch");
    }
    auto dist = next_(prefix);
    const auto where = format_string(*alphabet_, prefix);
    validate_distribution(*alphabet_, dist, where);
    if (prefix.content_length() >= max_len_) {
        for (const auto& [sym, p] : dist) {
            if (sym != Symbol::eos && p > 0.0)
                throw ValidationError("path through '" + where + "' exceeds max_len without <eos>");
        }
    }
    return dist;
}

const BranchMap& TrajectoryModel::branches() const
{
    if (!branches_) throw NonEnumerableError("model is callback-backed and cannot be enumerated");
    return *branches_;
}

// --- documents ------------------------------------------------------------

namespace {

TokenString parse_prefix_key(const Alphabet& alphabet, const std::string& key)
{
    auto s = parse_string(alphabet, key);
    if (s.terminal()) throw ValidationError("branch key '" + key + "' is terminal");
    return s;
}

std::string prefix_key(const Alphabet& alphabet, const TokenString& s)
{
    return detokenize(alphabet, s);
}

} // namespace

TrajectoryModel load_model(const nlohmann::json& doc)
{
    try {
        if (!doc.is_object()) throw ConfigError("model document must be an object");
        auto tokens = doc.at("tokens").get<std::vector<std::string>>();
        const auto max_len_signed = doc.at("max_len").get<long long>();
        if (max_len_signed <= 0) throw ValidationError("max_len must be positive");
        Alphabet alphabet(std::move(tokens));

        BranchMap branches;
        for (const auto& [key, entries] : doc.at("branches").items()) {
            auto prefix = parse_prefix_key(alphabet, key);
            if (!entries.is_object()) throw ConfigError("branch '" + key + "' must be an object");
            NextTokenDistribution dist;
            for (const auto& [tok, p] : entries.items()) {
                if (!p.is_number()) throw ConfigError("probability for '" + tok + "' must be a number");
                const Symbol s = alphabet.symbol(tok);
                if (s == Symbol::bos) throw ValidationError("<bos> cannot be generated");
                dist.push_back({s, p.get<double>()});
            }
            std::sort(dist.begin(), dist.end(), [](const Outcome& a, const Outcome& b) { return a.symbol < b.symbol; });
            if (!branches.emplace(std::move(prefix), std::move(dist)).second)
                throw ValidationError("duplicate branch '" + key + "'");
        }
        return TrajectoryModel::from_branches(std::move(alphabet), static_cast<std::size_t>(max_len_signed),
                                              std::move(branches));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed model document: ") + e.what());
    }
}

TrajectoryModel load_model_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open model file '" + path.string() + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed model document '" + path.string() + "': " + e.what());
    }
    return load_model(doc);
}

nlohmann::json model_to_json(const TrajectoryModel& model)
{
    const auto& alphabet = model.alphabet();
    nlohmann::ordered_json doc;
    doc["tokens"] = std::vector<std::string>(alphabet.tokens().begin(), alphabet.tokens().end());
    doc["max_len"] = model.max_len();
    nlohmann::ordered_json branches = nlohmann::ordered_json::object();
    for (const auto& [prefix, dist] : model.branches()) {
        nlohmann::ordered_json entries = nlohmann::ordered_json::object();
        for (const auto& [sym, p] : dist) entries[std::string(alphabet.name(sym))] = p;
        branches[prefix_key(alphabet, prefix)] = std::move(entries);
    }
    doc["branches"] = std::move(branches);
    return nlohmann::json(doc);
}

// --- probabilities --------------------------------------------------------

namespace {

double branch_log_probability(const NextTokenDistribution& dist, Symbol s)
{
    auto it = std::lower_bound(dist.begin(), dist.end(), s,
                               [](const Outcome& o, Symbol v) { return o.symbol < v; });
    if (it == dist.end() || it->symbol != s || it->probability <= 0.0)
        return -std::numeric_limits<double>::infinity();
    return std::log(it->probability);
}

void check_prompt(const TrajectoryModel& model, const TokenString& prompt)
{
    if (prompt.terminal()) throw DomainError("prompt must be non-terminal");
    if (prompt.content_length() > model.max_len()) throw DomainError("prompt is longer than max_len");
    if (model.enumerable() && !model.find_branch(prompt))
        throw DomainError("prompt '" + format_string(model.alphabet(), prompt) + "' has no defined branch");
}

} // namespace

double trajectory_log_probability(const TrajectoryModel& model, const TokenString& prompt, const TokenString& y)
{
    if (!y.terminal()) throw DomainError("trajectory must end with <eos>");
    if (!prompt.is_prefix_of(y)) throw DomainError("trajectory does not extend the prompt");
    CompensatedSum log_p;
    for (std::size_t k = prompt.size(); k < y.size(); ++k) {
        const auto prefix = y.prefix(k);
        const NextTokenDistribution* branch = model.find_branch(prefix);
        NextTokenDistribution owned;
        if (!branch) {
            if (model.enumerable()) return -std::numeric_limits<double>::infinity();
            owned = model.next(prefix);
            branch = &owned;
        }
        const double lp = branch_log_probability(*branch, y.symbols()[k]);
        if (!std::isfinite(lp)) return lp;
        log_p.add(lp);
    }
    return log_p.value();
}

double trajectory_probability(const TrajectoryModel& model, const TokenString& prompt, const TokenString& y)
{
    return std::exp(trajectory_log_probability(model, prompt, y));
}

namespace {

void enumerate_from(const TrajectoryModel& model, const TokenString& prefix, double log_p,
                    std::vector<Trajectory>& out)
{
    const auto& dist = *model.find_branch(prefix);
    for (const auto& [sym, p] : dist) {
        if (p <= 0.0) continue;
        const double lp = log_p + std::log(p);
        auto child = prefix.extended(sym);
        if (sym == Symbol::eos) {
            out.push_back({std::move(child), std::exp(lp), lp});
        } else {
            enumerate_from(model, child, lp, out);
        }
    }
}

} // namespace

std::vector<Trajectory> enumerate_trajectories(const TrajectoryModel& model, const TokenString& prompt)
{
    if (!model.enumerable()) throw NonEnumerableError("cannot enumerate a callback-backed model");
    check_prompt(model, prompt);
    std::vector<Trajectory> out;
    enumerate_from(model, prompt, 0.0, out);
    return out;
}

// --- sampling -------------------------------------------------------------

namespace {

Symbol draw(const NextTokenDistribution& dist, Rng& rng)
{
    const double u = rng.uniform();
    double acc = 0.0;
    const Outcome* last_positive = nullptr;
    for (const auto& o : dist) {
        if (o.probability <= 0.0) continue;
        last_positive = &o;
        acc += o.probability;
        if (u < acc) return o.symbol;
    }
    return last_positive->symbol;
}

TokenString sample_with(const TrajectoryModel& model, TokenString prefix, Rng& rng)
{
    while (!prefix.terminal()) prefix = prefix.extended(draw(model.next(prefix), rng));
    return prefix;
}

} // namespace

TokenString sample_trajectory(const TrajectoryModel& model, const TokenString& prompt, std::uint64_t seed)
{
    check_prompt(model, prompt);
    Rng rng(derive_seed(seed, 0));
    return sample_with(model, prompt, rng);
}

std::vector<TokenString> sample_trajectories(const TrajectoryModel& model, const TokenString& prompt,
                                             std::uint64_t seed, std::size_t count)
{
    check_prompt(model, prompt);
    std::vector<TokenString> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Rng rng(derive_seed(seed, i));
        out.push_back(sample_with(model, prompt, rng));
    }
    return out;
}

// --- interventions --------------------------------------------------------

namespace {

/// Renormalizes log-weights of a branch into probabilities; -inf entries stay 0.
NextTokenDistribution renormalize(const NextTokenDistribution& dist, const std::vector<double>& log_w)
{
    const double z = log_sum_exp(log_w);
    NextTokenDistribution out;
    out.reserve(dist.size());
    CompensatedSum total;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        const double p = std::isfinite(log_w[i]) ? std::exp(log_w[i] - z) : 0.0;
        out.push_back({dist[i].symbol, p});
        total.add(p);
    }
    const double t = total.value();
    for (auto& o : out) o.probability /= t;
    return out;
}

NextTokenDistribution apply_temperature(const NextTokenDistribution& dist, double tau)
{
    std::vector<double> log_w;
    log_w.reserve(dist.size());
    for (const auto& o : dist)
        log_w.push_back(o.probability > 0.0 ? std::log(o.probability) / tau
                                            : -std::numeric_limits<double>::infinity());
    return renormalize(dist, log_w);
}

NextTokenDistribution apply_bias(const NextTokenDistribution& dist, const std::map<Symbol, double>& bias)
{
    std::vector<double> log_w;
    log_w.reserve(dist.size());
    for (const auto& o : dist) {
        double lw = o.probability > 0.0 ? std::log(o.probability) : -std::numeric_limits<double>::infinity();
        if (auto it = bias.find(o.symbol); it != bias.end() && std::isfinite(lw)) lw += it->second;
        log_w.push_back(lw);
    }
    return renormalize(dist, log_w);
}

TrajectoryModel map_branches(const TrajectoryModel& model,
                             const std::function<NextTokenDistribution(const NextTokenDistribution&)>& f)
{
    if (model.enumerable()) {
        BranchMap out;
        for (const auto& [prefix, dist] : model.branches()) out.emplace(prefix, f(dist));
        return TrajectoryModel::from_branches(model.alphabet(), model.max_len(), std::move(out));
    }
    return TrajectoryModel::from_callback(model.alphabet(), model.max_len(),
                                          [model, f](const TokenString& prefix) { return f(model.next(prefix)); });
}

TrajectoryModel prepend(const TrajectoryModel& model, const PrependPrompt& t)
{
    const auto& alphabet = model.alphabet();
    const TokenString hidden = parse_tokens(alphabet, t.tokens);
    if (hidden.terminal()) throw ValidationError("prepended prompt must not contain <eos>");
    const std::size_t k = hidden.content_length();
    if (k > model.max_len()) throw ValidationError("prepended prompt is longer than max_len");
    const std::size_t max_len = std::max<std::size_t>(1, model.max_len() - k);

    // Strips the hidden prompt from a prefix of the original model.
    auto reroot = [k](const TokenString& s) {
        std::vector<Symbol> rest(s.symbols().begin() + 1 + static_cast<std::ptrdiff_t>(k), s.symbols().end());
        return TokenString::from_symbols(std::move(rest));
    };

    if (model.enumerable()) {
        if (!model.find_branch(hidden))
            throw ValidationError("prepended prompt '" + format_string(alphabet, hidden) + "' has no branch");
        BranchMap out;
        for (const auto& [prefix, dist] : model.branches()) {
            if (hidden.is_prefix_of(prefix)) out.emplace(reroot(prefix), dist);
        }
        return TrajectoryModel::from_branches(alphabet, max_len, std::move(out));
    }
    return TrajectoryModel::from_callback(alphabet, max_len, [model, hidden](const TokenString& prefix) {
        std::vector<Symbol> full(hidden.symbols().begin(), hidden.symbols().end());
        full.insert(full.end(), prefix.symbols().begin() + 1, prefix.symbols().end());
        return model.next(TokenString::from_symbols(std::move(full)));
    });
}

/// log Z(x) = log sum_{y extends x} p(y|x) exp(beta r(y)), filled for every
/// prefix of the subtree rooted at the tilt prompt.
double tilt_log_mass(const TrajectoryModel& model, const TokenString& prefix, const RewardTilt& t,
                     std::map<TokenString, double>& log_mass)
{
    const auto& dist = *model.find_branch(prefix);
    std::vector<double> terms;
    terms.reserve(dist.size());
    for (const auto& [sym, p] : dist) {
        if (p <= 0.0) continue;
        auto child = prefix.extended(sym);
        double child_mass = 0.0;
        if (sym == Symbol::eos) {
            const double r = t.reward(child);
            if (!std::isfinite(r)) throw DomainError("reward '" + t.reward_name + "' is not finite");
            child_mass = t.beta * r;
        } else {
            child_mass = tilt_log_mass(model, child, t, log_mass);
        }
        log_mass.emplace(std::move(child), child_mass);
        terms.push_back(std::log(p) + child_mass);
    }
    const double z = log_sum_exp(terms);
    log_mass.emplace(prefix, z);
    return z;
}

TrajectoryModel tilt(const TrajectoryModel& model, const RewardTilt& t)
{
    if (!model.enumerable())
        throw NonEnumerableError("reward tilt needs an enumerable model for exact renormalization");
    if (!(t.beta >= 0.0) || !std::isfinite(t.beta)) throw ValidationError("reward tilt beta must be finite and >= 0");
    if (!t.reward) throw ValidationError("reward tilt has no reward function");
    check_prompt(model, t.prompt);

    std::map<TokenString, double> log_mass;
    tilt_log_mass(model, t.prompt, t, log_mass);

    BranchMap out;
    for (const auto& [prefix, dist] : model.branches()) {
        if (!t.prompt.is_prefix_of(prefix)) {
            out.emplace(prefix, dist);
            continue;
        }
        const auto self = log_mass.find(prefix);
        if (self == log_mass.end()) {
            out.emplace(prefix, dist); // zero-probability prefix, unreachable
            continue;
        }
        std::vector<double> log_w;
        log_w.reserve(dist.size());
        for (const auto& [sym, p] : dist) {
            if (p <= 0.0) {
                log_w.push_back(-std::numeric_limits<double>::infinity());
                continue;
            }
            log_w.push_back(std::log(p) + log_mass.at(prefix.extended(sym)) - self->second);
        }
        out.emplace(prefix, renormalize(dist, log_w));
    }
    return TrajectoryModel::from_branches(model.alphabet(), model.max_len(), std::move(out));
}

} // namespace

TrajectoryModel apply_intervention(const TrajectoryModel& model, const Intervention& w)
{
    TrajectoryModel current = model;
    for (const auto& transform : w.transforms) {
        current = std::visit(
            [&](const auto& t) -> TrajectoryModel {
                using T = std::decay_t<decltype(t)>;
                if constexpr (std::is_same_v<T, PrependPrompt>) {
                    return prepend(current, t);
                } else if constexpr (std::is_same_v<T, Temperature>) {
                    if (!(t.tau > 0.0) || !std::isfinite(t.tau))
                        throw ValidationError("temperature must be finite and > 0");
                    const double tau = t.tau;
                    return map_branches(current, [tau](const NextTokenDistribution& d) {
                        return apply_temperature(d, tau);
                    });
                } else if constexpr (std::is_same_v<T, TokenBias>) {
                    std::map<Symbol, double> bias;
                    for (const auto& [name, b] : t.bias) {
                        const auto sym = current.alphabet().find(name);
                        if (!sym || *sym == Symbol::bos) throw ValidationError("bias on unknown token '" + name + "'");
                        if (!std::isfinite(b)) throw ValidationError("bias for '" + name + "' must be finite");
                        bias.emplace(*sym, b);
                    }
                    return map_branches(current, [bias](const NextTokenDistribution& d) { return apply_bias(d, bias); });
                } else {
                    return tilt(current, t);
                }
            },
            transform);
    }
    return current;
}

std::string describe(const Intervention& w)
{
    if (w.transforms.empty()) return "identity";
    std::string out;
    for (const auto& transform : w.transforms) {
        if (!out.empty()) out += ';';
        std::visit(
            [&](const auto& t) {
                using T = std::decay_t<decltype(t)>;
                if constexpr (std::is_same_v<T, PrependPrompt>) {
                    out += "prepend_prompt(";
                    for (std::size_t i = 0; i < t.tokens.size(); ++i) out += (i ? " " : "") + t.tokens[i];
                    out += ')';
                } else if constexpr (std::is_same_v<T, Temperature>) {
                    out += "temperature(" + format_double(t.tau) + ')';
                } else if constexpr (std::is_same_v<T, TokenBias>) {
                    out += "token_bias(";
                    bool first = true;
                    for (const auto& [name, b] : t.bias) {
                        out += (first ? "" : ",") + name + ':' + format_double(b);
                        first = false;
                    }
                    out += ')';
                } else {
                    out += "reward_tilt(" + t.reward_name + ",beta=" + format_double(t.beta) + ')';
                }
            },
            transform);
    }
    return out;
}

} // namespace xeno
