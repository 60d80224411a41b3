#include "coup/log.hpp"

#include <cstdlib>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace coup {

void init_logging() {
    auto logger = spdlog::stderr_color_mt("coup");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");
    const char* env = std::getenv("COUP_LOG");
    const auto level = spdlog::level::from_str(env ? std::string(env) : std::string("info"));
    // from_str maps unknown names to off; keep info in that case.
    if (env && level == spdlog::level::off && std::string(env) != "off") {
        spdlog::set_level(spdlog::level::info);
        spdlog::warn("unknown COUP_LOG level '{}'", env);
    } else {
        spdlog::set_level(level);
    }
}

} // namespace coup
