#ifndef SEGROBUST_CORE_LOG_HPP
#define SEGROBUST_CORE_LOG_HPP

#include <spdlog/spdlog.h>

namespace segrobust {

// Applies SEGROBUST_LOG (error|warn|info|debug) to the default logger.
// Unset or unrecognized values leave the level at warn.
void init_logging_from_env();

}  // namespace segrobust

#endif  // SEGROBUST_CORE_LOG_HPP
