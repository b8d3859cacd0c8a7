#ifndef SEGROBUST_MODEL_GRADIENT_CHECK_HPP
#define SEGROBUST_MODEL_GRADIENT_CHECK_HPP

#include "segrobust/model/segmenter.hpp"

namespace segrobust {

struct GradientCheckOptions {
  double h = 1e-4;
  std::size_t coordinates = 64;
  std::uint64_t seed = 0;
  std::optional<SegPgdStep> segpgd;
};

struct GradientCheckResult {
  // max |fd - analytic| over checked coordinates, divided by the largest
  // magnitude seen on either side. 1.0 for a zero gradient against a
  // nonzero slope.
  double max_relative_error = 0;
  std::size_t checked = 0;
  // Coordinates rejected because the model changes piece within +-h.
  std::size_t skipped = 0;
};

// Central differences on a seeded random subset of input coordinates. The
// objective is pinned to the mask the model scores highest at `image`.
GradientCheckResult gradient_check(Segmenter& model, const ImageTensor& image, const PointPrompt& prompt,
                                   const BinaryMask& truth, const LossSpec& loss,
                                   const GradientCheckOptions& options = {});

}  // namespace segrobust

#endif  // SEGROBUST_MODEL_GRADIENT_CHECK_HPP
