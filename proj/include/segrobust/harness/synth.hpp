#ifndef SEGROBUST_HARNESS_SYNTH_HPP
#define SEGROBUST_HARNESS_SYNTH_HPP

#include <cstdint>
#include <filesystem>
#include <vector>

#include "segrobust/core/manifest.hpp"
#include "segrobust/core/types.hpp"

namespace segrobust {

struct SynthOptions {
  std::uint64_t seed = 0;
  std::size_t images = 1;
  Index height = 64;
  Index width = 64;
};

// Fractal-textured image with 2 to 5 pairwise disjoint rectangle, ellipse
// or blob annotations. Pixels are already 8-bit quantized so the PNG
// written for it decodes to the same values.
AnnotatedImage synth_image(std::uint64_t seed, Index height, Index width, const std::string& id);

std::vector<AnnotatedImage> synth_images(const SynthOptions& options);

// Writes images/<id>.png, masks/<id>_<k>.png and manifest.json under `dir`.
DatasetManifest synth_dataset(const SynthOptions& options, const std::filesystem::path& dir);

}  // namespace segrobust

#endif  // SEGROBUST_HARNESS_SYNTH_HPP
