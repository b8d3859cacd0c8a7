#include "segrobust/model/gradient_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "segrobust/core/rng.hpp"

namespace segrobust {

GradientCheckResult gradient_check(Segmenter& model, const ImageTensor& image, const PointPrompt& prompt,
                                   const BinaryMask& truth, const LossSpec& loss,
                                   const GradientCheckOptions& options) {
  const auto preds = model.predict(image, prompt);
  validate_predictions(preds, image.height(), image.width());
  const std::size_t head = highest_scored(preds);
  const auto base_sig = model.piecewise_signature(image, prompt);
  const auto analytic = model.input_gradient(image, prompt, truth, loss, options.segpgd, head);
  if (!analytic.gradient.same_shape(image)) throw ModelError("gradient shape differs from the image");

  DeterministicRng rng(options.seed);
  const auto total = static_cast<std::uint64_t>(image.size());
  const std::size_t wanted = std::min<std::size_t>(options.coordinates, total);
  std::vector<std::uint64_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  // Partial Fisher-Yates: skipped coordinates are replaced by further draws.
  GradientCheckResult result;
  double max_diff = 0, max_mag = 0;
  for (std::uint64_t k = 0; result.checked < wanted && k < total; ++k) {
    std::swap(order[k], order[k + rng.below(total - k)]);
    const auto flat = order[k];
    ImageTensor plus = image, minus = image;
    plus.data()[flat] += options.h;
    minus.data()[flat] -= options.h;
    if (base_sig && (model.piecewise_signature(plus, prompt) != base_sig ||
                     model.piecewise_signature(minus, prompt) != base_sig)) {
      ++result.skipped;
      continue;
    }
    const double lp = model.input_gradient(plus, prompt, truth, loss, options.segpgd, head).loss;
    const double lm = model.input_gradient(minus, prompt, truth, loss, options.segpgd, head).loss;
    const double fd = (lp - lm) / (2.0 * options.h);
    const double an = analytic.gradient.data()[flat];
    if (!std::isfinite(fd) || !std::isfinite(an)) throw NonFiniteGradient("non-finite gradient entry");
    max_diff = std::max(max_diff, std::abs(fd - an));
    max_mag = std::max({max_mag, std::abs(fd), std::abs(an)});
    ++result.checked;
  }
  result.max_relative_error = max_mag > 0 ? max_diff / max_mag : 0.0;
  return result;
}

}  // namespace segrobust
