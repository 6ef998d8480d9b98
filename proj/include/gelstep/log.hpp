#pragma once

// Minimal leveled logging to stderr. The level comes from GELSTEP_LOG
// (quiet | info | debug, default info) unless set explicitly.

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

namespace gelstep {

enum class LogLevel { Quiet = 0, Info = 1, Debug = 2 };

inline std::optional<LogLevel> parse_log_level(std::string_view s) {
    if (s == "quiet") return LogLevel::Quiet;
    if (s == "info") return LogLevel::Info;
    if (s == "debug") return LogLevel::Debug;
    return std::nullopt;
}

namespace detail {
inline LogLevel& log_level_storage() {
    static LogLevel level = [] {
        const char* env = std::getenv("GELSTEP_LOG");
        if (env == nullptr) return LogLevel::Info;
        return parse_log_level(env).value_or(LogLevel::Info);
    }();
    return level;
}
inline std::mutex& log_mutex() {
    static std::mutex m;
    return m;
}
inline void emit(std::string_view tag, const std::string& msg) {
    std::lock_guard lock(log_mutex());
    std::cerr << "[gelstep " << tag << "] " << msg << '\n';
}
}  // namespace detail

inline LogLevel log_level() { return detail::log_level_storage(); }
inline void set_log_level(LogLevel l) { detail::log_level_storage() = l; }

inline void log_warn(const std::string& msg) {
    if (log_level() >= LogLevel::Info) detail::emit("warn", msg);
}
inline void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::Info) detail::emit("info", msg);
}
inline void log_debug(const std::string& msg) {
    if (log_level() >= LogLevel::Debug) detail::emit("debug", msg);
}

}  // namespace gelstep
