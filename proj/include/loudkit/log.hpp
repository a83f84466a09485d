#pragma once

#include <cstdlib>
#include <iostream>
#include <string>
#include <string_view>

namespace loudkit {

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3, quiet = 4 };

/// Log level from the LOUDKIT_LOG environment variable; defaults to warn.
inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("LOUDKIT_LOG");
        if (!env) return LogLevel::warn;
        const std::string_view v(env);
        if (v == "debug") return LogLevel::debug;
        if (v == "info") return LogLevel::info;
        if (v == "warn") return LogLevel::warn;
        if (v == "error") return LogLevel::error;
        if (v == "quiet") return LogLevel::quiet;
        return LogLevel::warn;
    }();
    return level;
}

inline void log_message(LogLevel level, std::string_view tag, std::string_view msg) {
    if (level < log_level()) return;
    std::cerr << "loudkit " << tag << ": " << msg << '\n';
}

inline void log_debug(std::string_view msg) { log_message(LogLevel::debug, "debug", msg); }
inline void log_info(std::string_view msg) { log_message(LogLevel::info, "info", msg); }
inline void log_warn(std::string_view msg) { log_message(LogLevel::warn, "warn", msg); }
inline void log_error(std::string_view msg) { log_message(LogLevel::error, "error", msg); }

} // namespace loudkit
