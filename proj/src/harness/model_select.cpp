#include "segrobust/harness/model_select.hpp"

#include "segrobust/model/remote_segmenter.hpp"
#include "segrobust/model/toy_blob_net.hpp"

namespace segrobust {

ModelSource model_source_from_selector(const std::string& selector) {
  ModelSource src;
  src.name = selector;
  if (selector == "oracle") {
    src.ground_truth_oracle = true;
    return src;
  }
  if (selector == "toy" || selector.rfind("toy:", 0) == 0) {
    std::uint64_t seed = kDefaultToySeed;
    if (selector.size() > 4) {
      try {
        std::size_t used = 0;
        seed = std::stoull(selector.substr(4), &used);
        if (used != selector.size() - 4) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw ConfigInvalid("bad toy model seed in '" + selector + "'");
      }
    }
    src.factory = [seed] { return std::make_unique<ToyBlobNet>(seed); };
    return src;
  }
  if (selector.rfind("tcp:", 0) == 0 || selector.rfind("cmd:", 0) == 0) {
    src.factory = [selector]() -> std::unique_ptr<Segmenter> { return connect_remote(selector); };
    return src;
  }
  throw ConfigInvalid("unknown model selector '" + selector + "' (expected toy, oracle, tcp:HOST:PORT or cmd:PROGRAM)");
}

}  // namespace segrobust
