#ifndef PPGI_LOG_HPP
#define PPGI_LOG_HPP

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <memory>
#include <string>

namespace ppgi {

/// Library logger on stderr. Level comes from PULSE_LOG (trace, debug, info,
/// warn, error, critical, off); default is warn.
inline spdlog::logger& log()
{
    static std::shared_ptr<spdlog::logger> logger = [] {
        auto l = spdlog::get("ppgi");
        if (!l)
            l = spdlog::stderr_color_mt("ppgi");
        auto level = spdlog::level::warn;
        if (const char* env = std::getenv("PULSE_LOG"))
            level = spdlog::level::from_str(env);
        l->set_level(level);
        return l;
    }();
    return *logger;
}

} // namespace ppgi

#endif // PPGI_LOG_HPP
