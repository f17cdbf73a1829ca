#include "output.hpp"

#include "xeno/diagnostics.hpp"
#include "xeno/error.hpp"
#include "xeno/numeric.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <system_error>

#include <unistd.h>

namespace xeno::cli {

Json number(double x)
{
    if (std::isfinite(x)) return x;
    return format_double(x);
}

Json numbers(const std::vector<double>& xs)
{
    Json out = Json::array();
    for (double x : xs) out.push_back(number(x));
    return out;
}

void write_atomic(const std::filesystem::path& path, std::string_view content)
{
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            std::error_code ignored;
            std::filesystem::remove(tmp, ignored);
            throw ConfigError("short write to '" + tmp.string() + "'");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::error_code ignored;
        std::filesystem::remove(tmp, ignored);
        throw ConfigError("cannot move report into '" + path.string() + "': " + ec.message());
    }
}

std::string csv_field(std::string_view text)
{
    if (text.find_first_of(",\"\n") == std::string_view::npos) return std::string(text);
    std::string out = "\"";
    for (char c : text) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

WarningLog::WarningLog()
{
    previous_ = set_warning_handler([this](std::string_view msg) {
        messages_.emplace_back(msg);
        std::cerr << "warning: " << msg << '\n';
    });
}

WarningLog::~WarningLog()
{
    set_warning_handler(std::move(previous_));
}

} // namespace xeno::cli
