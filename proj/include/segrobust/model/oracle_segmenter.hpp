#ifndef SEGROBUST_MODEL_ORACLE_SEGMENTER_HPP
#define SEGROBUST_MODEL_ORACLE_SEGMENTER_HPP

#include "segrobust/model/segmenter.hpp"

namespace segrobust {

// Test double: returns the ground-truth annotation that contains the
// prompt point (an empty mask if none does), ignoring the pixels entirely.
// Its input gradient is identically zero.
class OracleSegmenter final : public Segmenter {
 public:
  explicit OracleSegmenter(std::vector<BinaryMask> annotations);

  SegmenterDescriptor descriptor() const override;
  std::vector<MaskPrediction> predict(const ImageTensor& image, const PointPrompt& prompt) override;
  InputGradient input_gradient(const ImageTensor& image, const PointPrompt& prompt,
                               const BinaryMask& truth, const LossSpec& loss,
                               const std::optional<SegPgdStep>& segpgd,
                               std::optional<std::size_t> head = std::nullopt) override;

 private:
  std::vector<BinaryMask> annotations_;
};

}  // namespace segrobust

#endif  // SEGROBUST_MODEL_ORACLE_SEGMENTER_HPP
