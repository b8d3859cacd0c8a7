#include "segrobust/model/oracle_segmenter.hpp"

namespace segrobust {

void validate_predictions(const std::vector<MaskPrediction>& preds, Index height, Index width) {
  if (preds.empty()) throw ModelError("segmenter returned no masks");
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& p = preds[i];
    if (p.mask.rows() != height || p.mask.cols() != width || p.field.rows() != height ||
        p.field.cols() != width)
      throw ModelError("mask " + std::to_string(i) + " has the wrong shape");
    if (!p.field.allFinite()) throw ModelError("mask " + std::to_string(i) + " field is not finite");
    if ((threshold(p.field) != p.mask).any())
      throw ModelError("mask " + std::to_string(i) + " differs from its thresholded field");
  }
}

OracleSegmenter::OracleSegmenter(std::vector<BinaryMask> annotations)
    : annotations_(std::move(annotations)) {}

SegmenterDescriptor OracleSegmenter::descriptor() const { return {"oracle-gt-echo", false, true}; }

std::vector<MaskPrediction> OracleSegmenter::predict(const ImageTensor& image, const PointPrompt& prompt) {
  MaskPrediction p;
  p.mask = BinaryMask::Constant(image.height(), image.width(), false);
  for (const auto& a : annotations_)
    if (a.rows() == image.height() && a.cols() == image.width() && within(prompt, a.rows(), a.cols()) &&
        a(prompt.y, prompt.x)) {
      p.mask = a;
      break;
    }
  p.field = p.mask.cast<double>();
  p.score = 1.0;
  return {p};
}

InputGradient OracleSegmenter::input_gradient(const ImageTensor& image, const PointPrompt& prompt,
                                              const BinaryMask& truth, const LossSpec& loss,
                                              const std::optional<SegPgdStep>& segpgd,
                                              std::optional<std::size_t>) {
  const auto preds = predict(image, prompt);
  const auto objective = attack_objective(preds.front().field, truth, loss, segpgd);
  return {objective.value, ImageTensor(image.height(), image.width())};
}

}  // namespace segrobust
