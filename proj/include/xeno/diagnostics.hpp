#pragma once

#include <functional>
#include <string>
#include <string_view>

namespace xeno {

using WarningHandler = std::function<void(std::string_view)>;

/// Installs the process-wide warning sink and returns the previous one.
/// The default handler writes "warning: ..." lines to stderr.
WarningHandler set_warning_handler(WarningHandler handler);

void warn(std::string_view message);

} // namespace xeno
