#ifndef SEGROBUST_HARNESS_MODEL_SELECT_HPP
#define SEGROBUST_HARNESS_MODEL_SELECT_HPP

#include <string>

#include "segrobust/harness/evaluate.hpp"

namespace segrobust {

// toy | toy:SEED | oracle | tcp:HOST:PORT | cmd:PROGRAM ARGS...
// Remote selectors connect lazily, once per factory call.
ModelSource model_source_from_selector(const std::string& selector);

}  // namespace segrobust

#endif  // SEGROBUST_HARNESS_MODEL_SELECT_HPP
