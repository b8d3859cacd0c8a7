#include "segrobust/core/image_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <string>

namespace segrobust {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_or_throw(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) {
    if (mode[0] == 'r') throw MissingFile("cannot open " + path.string());
    throw IoError("cannot create " + path.string());
  }
  return f;
}

[[noreturn]] void png_error_handler(png_structp, png_const_charp msg) {
  throw IoError(std::string("png: ") + msg);
}
void png_warning_handler(png_structp, png_const_charp) {}

struct Decoded {
  std::vector<std::uint8_t> samples;
  Index height = 0;
  Index width = 0;
  int channels = 0;
};

// Decodes to 8-bit gray or RGB, dropping alpha and expanding palettes.
Decoded decode_png(const std::filesystem::path& path, bool want_rgb) {
  auto file = open_or_throw(path, "rb");
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler, png_warning_handler);
  if (!png) throw IoError("png: out of memory");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};

  png_init_io(png, file.get());
  png_read_info(png, info);
  const auto color = png_get_color_type(png, info);
  const auto depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  const bool is_gray = color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA;
  if (want_rgb && is_gray) png_set_gray_to_rgb(png);
  if (!want_rgb && !is_gray) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  png_read_update_info(png, info);

  Decoded out;
  out.width = png_get_image_width(png, info);
  out.height = png_get_image_height(png, info);
  out.channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  out.samples.resize(stride * static_cast<std::size_t>(out.height));
  std::vector<png_bytep> rows(static_cast<std::size_t>(out.height));
  for (Index y = 0; y < out.height; ++y) rows[y] = out.samples.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  return out;
}

void encode_png(const std::filesystem::path& path, const std::uint8_t* samples, Index height,
                Index width, int channels) {
  auto file = open_or_throw(path, "wb");
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler, png_warning_handler);
  if (!png) throw IoError("png: out of memory");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};

  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (Index y = 0; y < height; ++y)
    png_write_row(png, const_cast<png_bytep>(samples + y * width * channels));
  png_write_end(png, nullptr);
}

}  // namespace

ImageTensor quantize_8bit(const ImageTensor& image) {
  ImageTensor out(image.height(), image.width());
  auto& dst = out.pixels();
  const auto& src = image.pixels();
  for (Index i = 0; i < src.size(); ++i) dst(i) = quantize_u8(src(i)) / 255.0;
  return out;
}

std::vector<std::uint8_t> to_rgb8(const ImageTensor& image) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(image.size()));
  const double* src = image.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = quantize_u8(src[i]);
  return out;
}

ImageTensor from_rgb8(const std::uint8_t* rgb, Index height, Index width) {
  ImageTensor out(height, width);
  double* dst = out.data();
  for (Index i = 0; i < out.size(); ++i) dst[i] = rgb[i] / 255.0;
  return out;
}

ImageTensor read_png_rgb(const std::filesystem::path& path) {
  const auto decoded = decode_png(path, true);
  return from_rgb8(decoded.samples.data(), decoded.height, decoded.width);
}

void write_png_rgb(const std::filesystem::path& path, const ImageTensor& image) {
  const auto rgb = to_rgb8(image);
  encode_png(path, rgb.data(), image.height(), image.width(), 3);
}

BinaryMask read_png_mask(const std::filesystem::path& path) {
  const auto decoded = decode_png(path, false);
  BinaryMask mask(decoded.height, decoded.width);
  for (Index y = 0; y < decoded.height; ++y)
    for (Index x = 0; x < decoded.width; ++x)
      mask(y, x) = decoded.samples[static_cast<std::size_t>(y * decoded.width + x)] != 0;
  return mask;
}

void write_png_mask(const std::filesystem::path& path, const BinaryMask& mask) {
  std::vector<std::uint8_t> gray(static_cast<std::size_t>(mask.size()));
  for (Index y = 0; y < mask.rows(); ++y)
    for (Index x = 0; x < mask.cols(); ++x)
      gray[static_cast<std::size_t>(y * mask.cols() + x)] = mask(y, x) ? 255 : 0;
  encode_png(path, gray.data(), mask.rows(), mask.cols(), 1);
}

}  // namespace segrobust
