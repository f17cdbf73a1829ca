#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace xeno::cli {

enum class Format { json, csv };

/// Everything one invocation resolved from its flags.
struct RunConfig {
    std::vector<std::string> models;
    std::string system;
    std::string prompt; ///< whitespace-separated token names
    std::string config; ///< score-config document path
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<Format> format;

    std::string trajectory;
    std::string candidates;
    std::string constraints;
    std::size_t count = 0;
    bool importance = false;
    std::vector<std::string> escort; ///< "q,r" pairs
    std::size_t pareto_n = 0;
    std::string pareto_baseline;
    std::size_t random_trees = 100;
};

struct CommandResult {
    std::string output;
    int exit_code = 0;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitValidation = 3;
inline constexpr int kExitIdentity = 4;

CommandResult cmd_analyze(const RunConfig& cfg);
CommandResult cmd_dynamics(const RunConfig& cfg);
CommandResult cmd_score(const RunConfig& cfg);
CommandResult cmd_sample(const RunConfig& cfg);
CommandResult cmd_pareto(const RunConfig& cfg);
CommandResult cmd_verify(const RunConfig& cfg);

} // namespace xeno::cli
