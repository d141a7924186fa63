#include "lanet/log.hpp"

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>

namespace lanet {

void init_logging() {
    if (!spdlog::get("lanet")) {
        auto logger = spdlog::stderr_logger_mt("lanet");
        logger->set_pattern("[%l] %v");
        spdlog::set_default_logger(logger);
    }
    const char* env = std::getenv("LANET_LOG");
    spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::info);
}

}  // namespace lanet
