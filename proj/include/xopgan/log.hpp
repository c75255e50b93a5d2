#pragma once

#include <string_view>

namespace xopgan {

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

/// Threshold from XOPGAN_LOG ("error", "warn", "info", "debug"); default warn.
LogLevel log_level();
void set_log_level(LogLevel level);
void log(LogLevel level, std::string_view message);

}  // namespace xopgan
