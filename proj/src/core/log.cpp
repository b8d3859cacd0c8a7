#include "segrobust/core/log.hpp"

#include <cstdlib>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <string_view>

namespace segrobust {

void init_logging_from_env() {
  auto logger = spdlog::stderr_color_mt("segrobust");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  const char* env = std::getenv("SEGROBUST_LOG");
  if (!env) return;
  const std::string_view v(env);
  if (v == "error") spdlog::set_level(spdlog::level::err);
  else if (v == "warn") spdlog::set_level(spdlog::level::warn);
  else if (v == "info") spdlog::set_level(spdlog::level::info);
  else if (v == "debug") spdlog::set_level(spdlog::level::debug);
}

}  // namespace segrobust
