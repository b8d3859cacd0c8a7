#ifndef SEGROBUST_CORE_IMAGE_IO_HPP
#define SEGROBUST_CORE_IMAGE_IO_HPP

#include <cstdint>
#include <filesystem>
#include <vector>

#include "segrobust/core/types.hpp"

namespace segrobust {

// [0,1] real -> 8-bit code, round half away from zero.
inline std::uint8_t quantize_u8(double v) {
  const double c = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

// Snap every element to the nearest 8-bit level.
ImageTensor quantize_8bit(const ImageTensor& image);

std::vector<std::uint8_t> to_rgb8(const ImageTensor& image);
ImageTensor from_rgb8(const std::uint8_t* rgb, Index height, Index width);

ImageTensor read_png_rgb(const std::filesystem::path& path);
void write_png_rgb(const std::filesystem::path& path, const ImageTensor& image);

// Gray PNG; any nonzero sample counts as foreground.
BinaryMask read_png_mask(const std::filesystem::path& path);
// Emitted strictly as {0, 255}.
void write_png_mask(const std::filesystem::path& path, const BinaryMask& mask);

}  // namespace segrobust

#endif  // SEGROBUST_CORE_IMAGE_IO_HPP
