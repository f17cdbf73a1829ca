#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace xeno::cli {

using Json = nlohmann::ordered_json;

/// JSON number, or its text form ("inf", "nan") when not finite.
Json number(double x);
Json numbers(const std::vector<double>& xs);

/// Writes `content` to a sibling temp file and renames it over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view content);

/// Quotes a CSV field when it contains a comma, quote or newline.
std::string csv_field(std::string_view text);

/// Collects library warnings for the report and echoes them to stderr.
class WarningLog {
public:
    WarningLog();
    ~WarningLog();
    WarningLog(const WarningLog&) = delete;
    WarningLog& operator=(const WarningLog&) = delete;

    const std::vector<std::string>& messages() const noexcept { return messages_; }

private:
    std::vector<std::string> messages_;
    std::function<void(std::string_view)> previous_;
};

} // namespace xeno::cli
