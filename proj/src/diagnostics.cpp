#include "xeno/diagnostics.hpp"
#include "xeno/numeric.hpp"

#include <array>
#include <charconv>
#include <iostream>
#include <mutex>

namespace xeno {
namespace {

std::mutex& handler_mutex()
{
    static std::mutex m;
    return m;
}

WarningHandler& handler_slot()
{
    static WarningHandler handler = [](std::string_view msg) {
        std::cerr << "warning: " << msg << '\n';
    };
    return handler;
}

} // namespace

WarningHandler set_warning_handler(WarningHandler handler)
{
    std::lock_guard lock(handler_mutex());
    auto previous = std::move(handler_slot());
    handler_slot() = std::move(handler);
    return previous;
}

void warn(std::string_view message)
{
    std::lock_guard lock(handler_mutex());
    if (handler_slot()) handler_slot()(message);
}

std::string format_double(double x)
{
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), end);
}

} // namespace xeno
