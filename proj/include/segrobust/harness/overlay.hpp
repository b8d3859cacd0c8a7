#ifndef SEGROBUST_HARNESS_OVERLAY_HPP
#define SEGROBUST_HARNESS_OVERLAY_HPP

#include <filesystem>

#include "segrobust/core/types.hpp"

namespace segrobust {

// Image with the predicted mask contour in green, the ground-truth contour
// in red and a yellow star at the prompt.
ImageTensor render_overlay(const ImageTensor& image, const BinaryMask& predicted, const BinaryMask& truth,
                           const PointPrompt& prompt);

void write_overlay(const std::filesystem::path& path, const ImageTensor& image, const BinaryMask& predicted,
                   const BinaryMask& truth, const PointPrompt& prompt);

}  // namespace segrobust

#endif  // SEGROBUST_HARNESS_OVERLAY_HPP
