#ifndef SEGROBUST_CORE_TYPES_HPP
#define SEGROBUST_CORE_TYPES_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "segrobust/errors.hpp"

namespace segrobust {

using Index = Eigen::Index;

template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Per-pixel foreground probability of one predicted mask, pre-threshold.
template <typename Scalar>
using ProbField = Plane<Scalar>;
using PredictionField = ProbField<double>;

using BinaryMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// H x W x 3 image stored as an H x 3W row-major array, so the raw buffer is
// row-major channel-interleaved RGB. Values are expected in [0,1].
template <typename Scalar>
class Image {
 public:
  using Pixels = Plane<Scalar>;
  using ChannelMap = Eigen::Map<Pixels, 0, Eigen::Stride<Eigen::Dynamic, 3>>;
  using ConstChannelMap = Eigen::Map<const Pixels, 0, Eigen::Stride<Eigen::Dynamic, 3>>;

  Image() = default;
  Image(Index height, Index width) : Image(height, width, Scalar(0)) {}
  Image(Index height, Index width, Scalar fill) : pixels_(height, 3 * width) {
    if (height < 1 || width < 1)
      throw DimensionMismatch("image dimensions must be positive");
    pixels_.setConstant(fill);
  }
  explicit Image(Pixels pixels) : pixels_(std::move(pixels)) {
    if (pixels_.rows() < 1 || pixels_.cols() < 3 || pixels_.cols() % 3 != 0)
      throw DimensionMismatch("image buffer must be H x 3W with H, W >= 1");
  }

  Index height() const { return pixels_.rows(); }
  Index width() const { return pixels_.cols() / 3; }
  Index size() const { return pixels_.size(); }

  Scalar& operator()(Index y, Index x, Index c) { return pixels_(y, 3 * x + c); }
  Scalar operator()(Index y, Index x, Index c) const { return pixels_(y, 3 * x + c); }

  Pixels& pixels() { return pixels_; }
  const Pixels& pixels() const { return pixels_; }
  Scalar* data() { return pixels_.data(); }
  const Scalar* data() const { return pixels_.data(); }

  ChannelMap channel(Index c) {
    return ChannelMap(pixels_.data() + c, height(), width(),
                      Eigen::Stride<Eigen::Dynamic, 3>(pixels_.cols(), 3));
  }
  ConstChannelMap channel(Index c) const {
    return ConstChannelMap(pixels_.data() + c, height(), width(),
                           Eigen::Stride<Eigen::Dynamic, 3>(pixels_.cols(), 3));
  }

  bool same_shape(const Image& other) const {
    return height() == other.height() && width() == other.width();
  }
  bool operator==(const Image& other) const {
    return same_shape(other) && (pixels_ == other.pixels_).all();
  }

  template <typename Other>
  Image<Other> cast() const {
    return Image<Other>(pixels_.template cast<Other>().eval());
  }

 private:
  Pixels pixels_;
};

using ImageTensor = Image<double>;

template <typename Scalar>
bool is_valid_image(const Image<Scalar>& image) {
  const auto& p = image.pixels();
  return p.allFinite() && (p >= Scalar(0)).all() && (p <= Scalar(1)).all();
}

template <typename Scalar>
Image<Scalar> clamp01(Image<Scalar> image) {
  image.pixels() = image.pixels().max(Scalar(0)).min(Scalar(1));
  return image;
}

struct PointPrompt {
  Index x = 0;
  Index y = 0;
  bool operator==(const PointPrompt&) const = default;
};

struct BoxPrompt {
  Index x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool operator==(const BoxPrompt&) const = default;
};

inline bool within(const PointPrompt& p, Index height, Index width) {
  return p.x >= 0 && p.y >= 0 && p.x < width && p.y < height;
}

inline bool within(const BoxPrompt& b, Index height, Index width) {
  return b.x0 >= 0 && b.y0 >= 0 && b.x0 < b.x1 && b.y0 < b.y1 && b.x1 <= width &&
         b.y1 <= height;
}

inline Index popcount(const BinaryMask& mask) { return mask.count(); }

inline bool same_shape(const BinaryMask& a, const BinaryMask& b) {
  return a.rows() == b.rows() && a.cols() == b.cols();
}

template <typename Scalar>
BinaryMask threshold(const ProbField<Scalar>& field, Scalar level = Scalar(0.5)) {
  return field > level;
}

struct Annotation {
  BinaryMask mask;
  Index area = 0;
};

// One image with its ground-truth masks; annotation indices are stable.
struct AnnotatedImage {
  std::string id;
  ImageTensor image;
  std::vector<Annotation> annotations;

  // Throws EmptyMask / DimensionMismatch when the invariants do not hold.
  void validate() const {
    for (std::size_t i = 0; i < annotations.size(); ++i) {
      const auto& a = annotations[i];
      if (a.mask.rows() != image.height() || a.mask.cols() != image.width())
        throw DimensionMismatch(id + ": annotation " + std::to_string(i) +
                                " does not match image dimensions");
      if (popcount(a.mask) == 0)
        throw EmptyMask(id + ": annotation " + std::to_string(i) + " is empty");
      if (popcount(a.mask) != a.area)
        throw AreaMismatch(id + ": annotation " + std::to_string(i) +
                           " area does not match its pixel count");
    }
  }
};

}  // namespace segrobust

#endif  // SEGROBUST_CORE_TYPES_HPP
