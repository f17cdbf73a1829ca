#include "xeno/structures.hpp"

#include "xeno/diagnostics.hpp"
#include "xeno/error.hpp"
#include "xeno/numeric.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

namespace xeno {

std::string_view to_string(StructureKind kind)
{
    switch (kind) {
    case StructureKind::token_indicator: return "token_indicator";
    case StructureKind::ngram_indicator: return "ngram_indicator";
    case StructureKind::regex_match: return "regex_match";
    case StructureKind::tabulated: return "tabulated";
    case StructureKind::membership_set: return "membership_set";
    case StructureKind::weighted_combination: return "weighted_combination";
    case StructureKind::external_callback: return "external_callback";
    }
    return "unknown";
}

// --- subprocess callback --------------------------------------------------

SubprocessCallback::SubprocessCallback(std::vector<std::string> argv, std::chrono::milliseconds timeout)
    : argv_(std::move(argv)), timeout_(timeout)
{
    if (argv_.empty()) throw ValidationError("external callback needs a command");
    if (timeout_.count() <= 0) throw ValidationError("external callback timeout must be positive");
}

namespace {

struct Fd {
    int fd = -1;
    ~Fd() { reset(); }
    void reset()
    {
        if (fd >= 0) ::close(fd);
        fd = -1;
    }
};

} // namespace

double SubprocessCallback::operator()(std::string_view text)
{
    int in_pipe[2];
    int out_pipe[2];
    if (::pipe(in_pipe) != 0) throw CallbackError("pipe() failed");
    if (::pipe(out_pipe) != 0) {
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        throw CallbackError("pipe() failed");
    }
    std::vector<char*> args;
    for (auto& a : argv_) args.push_back(a.data());
    args.push_back(nullptr);

    const pid_t pid = ::fork();
    if (pid < 0) throw CallbackError("fork() failed");
    if (pid == 0) {
        ::dup2(in_pipe[0], STDIN_FILENO);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        ::close(out_pipe[0]);
        ::close(out_pipe[1]);
        ::execvp(args[0], args.data());
        ::_exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    Fd to_child{in_pipe[1]};
    Fd from_child{out_pipe[0]};

    // The payload is small; a blocking write is fine unless the child
    // refuses to read, which the timeout below then catches.
    std::signal(SIGPIPE, SIG_IGN);
    std::string payload(text);
    payload += '\n';
    std::size_t written = 0;
    while (written < payload.size()) {
        const auto n = ::write(to_child.fd, payload.data() + written, payload.size() - written);
        if (n <= 0) break;
        written += static_cast<std::size_t>(n);
    }
    to_child.reset();

    std::string output;
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    bool timed_out = false;
    for (;;) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) {
            timed_out = true;
            break;
        }
        pollfd pfd{from_child.fd, POLLIN, 0};
        const int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
        if (ready < 0 && errno == EINTR) continue;
        if (ready <= 0) {
            timed_out = ready == 0;
            break;
        }
        char buf[512];
        const auto n = ::read(from_child.fd, buf, sizeof buf);
        if (n <= 0) break;
        output.append(buf, static_cast<std::size_t>(n));
    }
    if (timed_out) ::kill(pid, SIGKILL);
    int status = 0;
    ::waitpid(pid, &status, 0);
    if (timed_out) throw CallbackError("external callback '" + argv_.front() + "' timed out");
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
        throw CallbackError("external callback '" + argv_.front() + "' failed");

    char* end = nullptr;
    const double value = std::strtod(output.c_str(), &end);
    if (end == output.c_str()) throw CallbackError("external callback '" + argv_.front() + "' printed no number");
    return value;
}

// --- Structure ------------------------------------------------------------

Structure::Structure(std::string name, const Alphabet& alphabet, Params params)
    : name_(std::move(name)), alphabet_(std::make_shared<const Alphabet>(alphabet)), params_(std::move(params))
{
    if (name_.empty()) throw ValidationError("structure name must be non-empty");
}

Structure Structure::token_indicator(std::string name, const Alphabet& alphabet, std::string_view token)
{
    const Symbol s = alphabet.symbol(token);
    return Structure(std::move(name), alphabet, TokenIndicator{s});
}

Structure Structure::ngram_indicator(std::string name, const Alphabet& alphabet, std::span<const std::string> ngram)
{
    if (ngram.empty()) throw ValidationError("ngram_indicator '" + name + "' needs at least one token");
    std::vector<Symbol> symbols;
    for (const auto& t : ngram) symbols.push_back(alphabet.symbol(t));
    return Structure(std::move(name), alphabet, NgramIndicator{std::move(symbols)});
}

Structure Structure::regex_match(std::string name, const Alphabet& alphabet, std::string pattern)
{
    std::shared_ptr<const std::regex> re;
    try {
        re = std::make_shared<const std::regex>(pattern, std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
        throw ValidationError("regex_match '" + name + "': invalid pattern: " + e.what());
    }
    return Structure(std::move(name), alphabet, RegexMatch{std::move(pattern), std::move(re)});
}

Structure Structure::tabulated(std::string name, const Alphabet& alphabet, std::map<TokenString, double> table,
                               std::optional<double> fallback)
{
    auto in_range = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
    for (const auto& [k, v] : table) {
        if (!in_range(v)) throw ValidationError("tabulated '" + name + "' has a value outside [0,1]");
    }
    if (fallback && !in_range(*fallback)) throw ValidationError("tabulated '" + name + "' default outside [0,1]");
    return Structure(std::move(name), alphabet, Tabulated{std::move(table), fallback});
}

Structure Structure::membership_set(std::string name, const Alphabet& alphabet, std::set<TokenString> members)
{
    return Structure(std::move(name), alphabet, MembershipSet{std::move(members)});
}

Structure Structure::weighted_combination(std::string name, const Alphabet& alphabet,
                                          std::vector<std::pair<double, Structure>> parts)
{
    if (parts.empty()) throw ValidationError("weighted_combination '" + name + "' has no components");
    CompensatedSum total;
    WeightedCombination wc;
    for (auto& [w, s] : parts) {
        if (!std::isfinite(w) || w < 0.0)
            throw ValidationError("weighted_combination '" + name + "' has a negative weight");
        if (!(s.alphabet() == alphabet))
            throw ValidationError("weighted_combination '" + name + "' mixes alphabets");
        total.add(w);
        wc.parts.emplace_back(w, std::make_shared<const Structure>(std::move(s)));
    }
    if (std::abs(total.value() - 1.0) > 1e-9)
        throw ValidationError("weighted_combination '" + name + "' weights must sum to 1");
    return Structure(std::move(name), alphabet, std::move(wc));
}

Structure Structure::external_callback(std::string name, const Alphabet& alphabet,
                                       std::shared_ptr<ComplianceCallback> callback)
{
    if (!callback) throw ValidationError("external_callback '" + name + "' has no callback");
    return Structure(std::move(name), alphabet, ExternalCallback{std::move(callback), std::make_shared<std::mutex>()});
}

namespace {

bool contains_ngram(std::span<const Symbol> haystack, std::span<const Symbol> needle)
{
    return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) != haystack.end();
}

} // namespace

double Structure::evaluate(const TokenString& x) const
{
    return std::visit(
        [&](const auto& p) -> double {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, TokenIndicator>) {
                const auto s = x.symbols();
                return std::find(s.begin(), s.end(), p.token) != s.end() ? 1.0 : 0.0;
            } else if constexpr (std::is_same_v<T, NgramIndicator>) {
                return contains_ngram(x.symbols(), p.ngram) ? 1.0 : 0.0;
            } else if constexpr (std::is_same_v<T, RegexMatch>) {
                return std::regex_search(detokenize(*alphabet_, x), *p.regex) ? 1.0 : 0.0;
            } else if constexpr (std::is_same_v<T, Tabulated>) {
                if (auto it = p.table.find(x); it != p.table.end()) return it->second;
                if (p.fallback) return *p.fallback;
                throw DomainError("tabulated structure '" + name_ + "' has no entry for '" +
                                  format_string(*alphabet_, x) + "' and no default");
            } else if constexpr (std::is_same_v<T, MembershipSet>) {
                return p.members.contains(x) ? 1.0 : 0.0;
            } else if constexpr (std::is_same_v<T, WeightedCombination>) {
                CompensatedSum acc;
                for (const auto& [w, s] : p.parts) acc.add(w * s->evaluate(x));
                return std::clamp(acc.value(), 0.0, 1.0);
            } else {
                const auto text = detokenize(*alphabet_, x);
                double v = 0.0;
                if (p.callback->reentrant()) {
                    v = (*p.callback)(text);
                } else {
                    std::lock_guard lock(*p.serial);
                    v = (*p.callback)(text);
                }
                if (std::isfinite(v) && v >= 0.0 && v <= 1.0) return v;
                if (std::isfinite(v) && v >= -kCallbackSlack && v <= 1.0 + kCallbackSlack) {
                    warn("structure '" + name_ + "': callback value " + format_double(v) + " clamped to [0,1]");
                    return std::clamp(v, 0.0, 1.0);
                }
                throw CallbackError("structure '" + name_ + "': callback returned " + format_double(v) +
                                    ", outside [0,1]");
            }
        },
        params_);
}

// --- System ---------------------------------------------------------------

System::System(std::vector<Structure> structures) : structures_(std::move(structures))
{
    if (structures_.empty()) throw ValidationError("a system needs at least one structure");
    std::set<std::string> seen;
    for (const auto& s : structures_) {
        if (!seen.insert(s.name()).second) throw ValidationError("duplicate structure name '" + s.name() + "'");
    }
}

std::vector<std::string> System::names() const
{
    std::vector<std::string> out;
    for (const auto& s : structures_) out.push_back(s.name());
    return out;
}

double evaluate_structure(const Structure& s, const TokenString& x)
{
    return s.evaluate(x);
}

ComplianceVector evaluate_system(const System& system, const TokenString& x)
{
    ComplianceVector v;
    v.values.reserve(system.size());
    for (const auto& s : system.structures()) v.values.push_back(s.evaluate(x));
    return v;
}

// --- aggregation ----------------------------------------------------------

std::string to_string(const Aggregator& agg)
{
    switch (agg.kind) {
    case Aggregator::Kind::mean: return "mean";
    case Aggregator::Kind::min: return "min";
    case Aggregator::Kind::max: return "max";
    case Aggregator::Kind::pnorm: return "pnorm(" + format_double(agg.p) + ")";
    }
    return "unknown";
}

std::string_view to_string(DiffMetric m)
{
    switch (m) {
    case DiffMetric::abs_mean: return "abs_mean";
    case DiffMetric::l2norm: return "l2norm";
    case DiffMetric::linf: return "linf";
    case DiffMetric::l2raw: return "l2raw";
    }
    return "unknown";
}

Aggregator parse_aggregator(std::string_view text)
{
    if (text == "mean") return {Aggregator::Kind::mean};
    if (text == "min") return {Aggregator::Kind::min};
    if (text == "max") return {Aggregator::Kind::max};
    if (text.starts_with("pnorm")) {
        Aggregator agg{Aggregator::Kind::pnorm, 2.0};
        if (text.size() > 5) {
            if (text.size() < 8 || text[5] != '(' || text.back() != ')')
                throw ConfigError("aggregator must look like pnorm(p)");
            const std::string inner(text.substr(6, text.size() - 7));
            char* end = nullptr;
            agg.p = std::strtod(inner.c_str(), &end);
            if (end != inner.c_str() + inner.size() || !(agg.p >= 1.0))
                throw ConfigError("pnorm exponent must be a number >= 1");
        }
        return agg;
    }
    throw ConfigError("unknown aggregator '" + std::string(text) + "'");
}

DiffMetric parse_diff_metric(std::string_view text)
{
    if (text == "abs_mean") return DiffMetric::abs_mean;
    if (text == "l2norm") return DiffMetric::l2norm;
    if (text == "linf") return DiffMetric::linf;
    if (text == "l2raw") return DiffMetric::l2raw;
    throw ConfigError("unknown difference metric '" + std::string(text) + "'");
}

double system_score(std::span<const double> v, const Aggregator& agg)
{
    if (v.empty()) throw DomainError("cannot aggregate an empty vector");
    switch (agg.kind) {
    case Aggregator::Kind::mean: return compensated_sum(v) / static_cast<double>(v.size());
    case Aggregator::Kind::min: return *std::min_element(v.begin(), v.end());
    case Aggregator::Kind::max: return *std::max_element(v.begin(), v.end());
    case Aggregator::Kind::pnorm: {
        CompensatedSum acc;
        for (double x : v) acc.add(std::pow(std::abs(x), agg.p));
        return std::pow(acc.value() / static_cast<double>(v.size()), 1.0 / agg.p);
    }
    }
    throw DomainError("unknown aggregator");
}

double system_score(const ComplianceVector& v, const Aggregator& agg)
{
    return system_score(v.values, agg);
}

double metric_norm(std::span<const double> d, DiffMetric m)
{
    if (d.empty()) throw DomainError("cannot measure an empty vector");
    const auto n = static_cast<double>(d.size());
    switch (m) {
    case DiffMetric::abs_mean: {
        CompensatedSum acc;
        for (double x : d) acc.add(std::abs(x));
        return acc.value() / n;
    }
    case DiffMetric::l2norm:
    case DiffMetric::l2raw: {
        CompensatedSum acc;
        for (double x : d) acc.add(x * x);
        const double raw = std::sqrt(acc.value());
        return m == DiffMetric::l2raw ? raw : raw / std::sqrt(n);
    }
    case DiffMetric::linf: {
        double hi = 0.0;
        for (double x : d) hi = std::max(hi, std::abs(x));
        return hi;
    }
    }
    throw DomainError("unknown metric");
}

double difference_score(std::span<const double> a, std::span<const double> b, DiffMetric m)
{
    if (a.size() != b.size())
        throw DomainError("dimension mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return metric_norm(d, m);
}

double difference_score(const ComplianceVector& a, const ComplianceVector& b, DiffMetric m)
{
    return difference_score(a.values, b.values, m);
}

// --- documents ------------------------------------------------------------

namespace {

std::string string_param(const nlohmann::json& params, const char* key)
{
    return params.at(key).get<std::string>();
}

} // namespace

Structure load_structure(const nlohmann::json& record, const Alphabet& alphabet)
{
    try {
        auto name = record.at("name").get<std::string>();
        const auto kind = record.at("kind").get<std::string>();
        const nlohmann::json params = record.contains("params") ? record.at("params") : nlohmann::json::object();

        if (kind == "token_indicator") return Structure::token_indicator(name, alphabet, string_param(params, "token"));
        if (kind == "ngram_indicator") {
            std::vector<std::string> ngram;
            const auto& g = params.at("ngram");
            if (g.is_string()) {
                std::istringstream in(g.get<std::string>());
                for (std::string w; in >> w;) ngram.push_back(w);
            } else {
                ngram = g.get<std::vector<std::string>>();
            }
            return Structure::ngram_indicator(name, alphabet, ngram);
        }
        if (kind == "regex_match") return Structure::regex_match(name, alphabet, string_param(params, "pattern"));
        if (kind == "tabulated") {
            std::map<TokenString, double> table;
            for (const auto& [key, v] : params.at("table").items())
                table.emplace(parse_string(alphabet, key), v.get<double>());
            std::optional<double> fallback;
            if (params.contains("default")) fallback = params.at("default").get<double>();
            return Structure::tabulated(name, alphabet, std::move(table), fallback);
        }
        if (kind == "membership_set") {
            std::set<TokenString> members;
            for (const auto& m : params.at("members")) members.insert(parse_string(alphabet, m.get<std::string>()));
            return Structure::membership_set(name, alphabet, std::move(members));
        }
        if (kind == "weighted_combination") {
            std::vector<std::pair<double, Structure>> parts;
            for (const auto& c : params.at("components"))
                parts.emplace_back(c.at("weight").get<double>(), load_structure(c.at("structure"), alphabet));
            return Structure::weighted_combination(name, alphabet, std::move(parts));
        }
        if (kind == "external_callback") {
            std::vector<std::string> argv;
            const auto& cmd = params.at("command");
            if (cmd.is_string()) {
                argv = {"/bin/sh", "-c", cmd.get<std::string>()};
            } else {
                argv = cmd.get<std::vector<std::string>>();
            }
            const auto timeout = std::chrono::milliseconds(params.value("timeout_ms", 10000));
            return Structure::external_callback(name, alphabet,
                                                std::make_shared<SubprocessCallback>(std::move(argv), timeout));
        }
        throw ConfigError("unknown structure kind '" + kind + "'");
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed structure record: ") + e.what());
    }
}

System load_system(const nlohmann::json& doc, const Alphabet& alphabet)
{
    const nlohmann::json* list = &doc;
    if (doc.is_object() && doc.contains("structures")) list = &doc.at("structures");
    if (!list->is_array()) throw ConfigError("system document must be a list of structure records");
    std::vector<Structure> structures;
    for (const auto& record : *list) structures.push_back(load_structure(record, alphabet));
    return System(std::move(structures));
}

System load_system_file(const std::filesystem::path& path, const Alphabet& alphabet)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open system file '" + path.string() + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed system document '" + path.string() + "': " + e.what());
    }
    return load_system(doc, alphabet);
}

} // namespace xeno
