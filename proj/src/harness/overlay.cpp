#include "segrobust/harness/overlay.hpp"

#include <cstdlib>

#include "segrobust/core/image_io.hpp"

namespace segrobust {

namespace {

BinaryMask contour(const BinaryMask& m) {
  BinaryMask out = BinaryMask::Constant(m.rows(), m.cols(), false);
  for (Index y = 0; y < m.rows(); ++y)
    for (Index x = 0; x < m.cols(); ++x) {
      if (!m(y, x)) continue;
      const bool edge = y == 0 || x == 0 || y == m.rows() - 1 || x == m.cols() - 1 || !m(y - 1, x) ||
                        !m(y + 1, x) || !m(y, x - 1) || !m(y, x + 1);
      out(y, x) = edge;
    }
  return out;
}

void paint(ImageTensor& img, const BinaryMask& where, double r, double g, double b) {
  for (Index y = 0; y < img.height(); ++y)
    for (Index x = 0; x < img.width(); ++x)
      if (where(y, x)) {
        img(y, x, 0) = r;
        img(y, x, 1) = g;
        img(y, x, 2) = b;
      }
}

}  // namespace

ImageTensor render_overlay(const ImageTensor& image, const BinaryMask& predicted, const BinaryMask& truth,
                           const PointPrompt& prompt) {
  if (predicted.rows() != image.height() || predicted.cols() != image.width() || !same_shape(predicted, truth))
    throw DimensionMismatch("overlay: mask and image shapes differ");
  ImageTensor out = image;
  paint(out, contour(truth), 1.0, 0.0, 0.0);
  paint(out, contour(predicted), 0.0, 1.0, 0.0);
  constexpr Index kArm = 2;
  for (Index dy = -kArm; dy <= kArm; ++dy)
    for (Index dx = -kArm; dx <= kArm; ++dx) {
      if (!(dx == 0 || dy == 0 || std::abs(dx) == std::abs(dy))) continue;
      const Index y = prompt.y + dy, x = prompt.x + dx;
      if (y < 0 || x < 0 || y >= out.height() || x >= out.width()) continue;
      out(y, x, 0) = 1.0;
      out(y, x, 1) = 1.0;
      out(y, x, 2) = 0.0;
    }
  return out;
}

void write_overlay(const std::filesystem::path& path, const ImageTensor& image, const BinaryMask& predicted,
                   const BinaryMask& truth, const PointPrompt& prompt) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  write_png_rgb(path, render_overlay(image, predicted, truth, prompt));
}

}  // namespace segrobust
