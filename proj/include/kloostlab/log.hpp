#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>

// Minimal stderr logger. Verbosity comes from the KLOOSTLAB_LOG environment
// variable: error | warn | info | debug (default warn).

namespace kloostlab::log {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

inline Level threshold() {
    static Level lvl = [] {
        const char* env = std::getenv("KLOOSTLAB_LOG");
        if (!env) return Level::Warn;
        if (std::strcmp(env, "error") == 0) return Level::Error;
        if (std::strcmp(env, "warn") == 0) return Level::Warn;
        if (std::strcmp(env, "info") == 0) return Level::Info;
        if (std::strcmp(env, "debug") == 0) return Level::Debug;
        return Level::Warn;
    }();
    return lvl;
}

template <typename... Args>
inline void emit(Level lvl, const char* tag, const char* fmt, Args... args) {
    if (lvl > threshold()) return;
    std::fprintf(stderr, "[kloostlab %s] ", tag);
    if constexpr (sizeof...(Args) == 0)
        std::fputs(fmt, stderr);
    else
        std::fprintf(stderr, fmt, args...);
    std::fputc('\n', stderr);
}

template <typename... Args>
inline void error(const char* fmt, Args... args) { emit(Level::Error, "error", fmt, args...); }
template <typename... Args>
inline void warn(const char* fmt, Args... args) { emit(Level::Warn, "warn", fmt, args...); }
template <typename... Args>
inline void info(const char* fmt, Args... args) { emit(Level::Info, "info", fmt, args...); }
template <typename... Args>
inline void debug(const char* fmt, Args... args) { emit(Level::Debug, "debug", fmt, args...); }

} // namespace kloostlab::log
