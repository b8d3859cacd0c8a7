#ifndef SEGROBUST_MODEL_SEGMENTER_HPP
#define SEGROBUST_MODEL_SEGMENTER_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "segrobust/core/types.hpp"
#include "segrobust/losses.hpp"

namespace segrobust {

struct MaskPrediction {
  BinaryMask mask;
  PredictionField field;
  double score = 0;
};

struct SegmenterDescriptor {
  std::string name;
  bool multimask = false;
  bool concurrent_safe = false;
};

struct InputGradient {
  double loss = 0;
  ImageTensor gradient;  // same layout as the input image; may leave [0,1]
};

// Point-prompted segmenter. Besides predictions it exposes the gradient of
// an attack objective w.r.t. the input pixels, so attacks work against
// out-of-process models too.
class Segmenter {
 public:
  virtual ~Segmenter() = default;

  virtual SegmenterDescriptor descriptor() const = 0;

  virtual std::vector<MaskPrediction> predict(const ImageTensor& image, const PointPrompt& prompt) = 0;

  // Gradient of the objective evaluated on one predicted field. When `head`
  // is empty the highest-scored mask is used.
  virtual InputGradient input_gradient(const ImageTensor& image, const PointPrompt& prompt,
                                       const BinaryMask& truth, const LossSpec& loss,
                                       const std::optional<SegPgdStep>& segpgd,
                                       std::optional<std::size_t> head = std::nullopt) = 0;

  // Hash of every discrete decision the forward pass makes (activation
  // patterns, thresholds, mask choice). Equal signatures at two inputs mean
  // the model is one smooth piece between them. Empty if unknown.
  virtual std::optional<std::uint64_t> piecewise_signature(const ImageTensor&, const PointPrompt&) {
    return std::nullopt;
  }
};

using SegmenterFactory = std::function<std::unique_ptr<Segmenter>()>;

// Highest score wins; ties go to the lowest index.
inline std::size_t highest_scored(const std::vector<MaskPrediction>& preds) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < preds.size(); ++i)
    if (preds[i].score > preds[best].score) best = i;
  return best;
}

// Throws ModelError unless: at least one mask, shapes match the image, and
// each mask equals its field thresholded at 0.5.
void validate_predictions(const std::vector<MaskPrediction>& preds, Index height, Index width);

inline std::vector<BinaryMask> masks_of(const std::vector<MaskPrediction>& preds) {
  std::vector<BinaryMask> out;
  out.reserve(preds.size());
  for (const auto& p : preds) out.push_back(p.mask);
  return out;
}

}  // namespace segrobust

#endif  // SEGROBUST_MODEL_SEGMENTER_HPP
