#include "xopgan/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <string>

namespace xopgan {

namespace {

LogLevel from_env() {
    const char* env = std::getenv("XOPGAN_LOG");
    if (!env) return LogLevel::Warn;
    const std::string v(env);
    if (v == "error") return LogLevel::Error;
    if (v == "info") return LogLevel::Info;
    if (v == "debug") return LogLevel::Debug;
    return LogLevel::Warn;
}

std::atomic<int> g_level{static_cast<int>(from_env())};

constexpr const char* kNames[] = {"error", "warn", "info", "debug"};

}  // namespace

LogLevel log_level() { return static_cast<LogLevel>(g_level.load()); }
void set_log_level(LogLevel level) { g_level.store(static_cast<int>(level)); }

void log(LogLevel level, std::string_view message) {
    if (static_cast<int>(level) > g_level.load()) return;
    std::cerr << "[xopgan " << kNames[static_cast<int>(level)] << "] " << message << '\n';
}

}  // namespace xopgan
