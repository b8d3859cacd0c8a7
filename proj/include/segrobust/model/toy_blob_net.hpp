#ifndef SEGROBUST_MODEL_TOY_BLOB_NET_HPP
#define SEGROBUST_MODEL_TOY_BLOB_NET_HPP

#include <array>
#include <cstdint>

#include "segrobust/model/segmenter.hpp"

namespace segrobust {

// Weights of the toy segmenter. Convolution kernels are stored as
// out x (in * 9) with column index in * 9 + ky * 3 + kx.
struct ToyWeights {
  static constexpr int kChannels = 4;
  static constexpr int kHeads = 3;

  Eigen::Matrix<double, kChannels, kChannels * 9> conv1;
  Eigen::Vector<double, kChannels> bias1;
  Eigen::Matrix<double, kChannels, kChannels * 9> conv2;
  Eigen::Vector<double, kChannels> bias2;
  Eigen::Matrix<double, kHeads, kChannels> heads;
  Eigen::Vector<double, kHeads> head_bias;
  double tau = 8.0;

  // He-scaled gaussians drawn in the order conv1, bias1, conv2, bias2,
  // heads, head_bias (row-major within each).
  static ToyWeights from_seed(std::uint64_t seed);
};

// Prompt channel: 1 / (1 + d / tau), d the Euclidean pixel distance to the point.
Plane<double> prompt_channel(Index height, Index width, const PointPrompt& prompt, double tau);

// Smallest seed whose three heads each cover between 5% and 95% of the
// image on average over the calibration set synth_images({0xCA11B, 32,
// 32x32}) with prompts from select_prompt(rng(i)). Lower seeds leave some
// head saturated at all-on or all-off.
inline constexpr std::uint64_t kDefaultToySeed = 8;

// conv3x3(4)+ReLU -> conv3x3(4)+ReLU -> three 1x1 sigmoid heads, with the
// prompt injected as a fourth input channel. Immutable; safe to share.
class ToyBlobNet final : public Segmenter {
 public:
  explicit ToyBlobNet(std::uint64_t seed = kDefaultToySeed);
  explicit ToyBlobNet(ToyWeights weights);

  const ToyWeights& weights() const { return weights_; }

  SegmenterDescriptor descriptor() const override;
  std::vector<MaskPrediction> predict(const ImageTensor& image, const PointPrompt& prompt) override;
  InputGradient input_gradient(const ImageTensor& image, const PointPrompt& prompt,
                               const BinaryMask& truth, const LossSpec& loss,
                               const std::optional<SegPgdStep>& segpgd,
                               std::optional<std::size_t> head = std::nullopt) override;
  std::optional<std::uint64_t> piecewise_signature(const ImageTensor& image,
                                                   const PointPrompt& prompt) override;

  std::array<PredictionField, ToyWeights::kHeads> fields(const ImageTensor& image,
                                                         const PointPrompt& prompt) const;

 private:
  struct Activations;
  Activations forward(const ImageTensor& image, const PointPrompt& prompt) const;
  std::vector<MaskPrediction> package(const Activations& act) const;

  ToyWeights weights_;
};

}  // namespace segrobust

#endif  // SEGROBUST_MODEL_TOY_BLOB_NET_HPP
