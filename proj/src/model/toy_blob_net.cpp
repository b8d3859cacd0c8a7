#include "segrobust/model/toy_blob_net.hpp"

#include <cmath>

#include "segrobust/core/rng.hpp"

namespace segrobust {

namespace {

constexpr int C = ToyWeights::kChannels;
constexpr int K = ToyWeights::kHeads;

using Planes = std::array<Plane<double>, C>;
using Kernel = Eigen::Matrix<double, C, C * 9>;

// Same-size 3x3 cross-correlation with zero padding.
Planes conv3x3(const Planes& in, const Kernel& w, const Eigen::Vector<double, C>& bias) {
  const Index h = in[0].rows(), wd = in[0].cols();
  Planes out;
  for (int o = 0; o < C; ++o) out[o] = Plane<double>::Constant(h, wd, bias(o));
  Plane<double> padded = Plane<double>::Zero(h + 2, wd + 2);
  for (int k = 0; k < C; ++k) {
    padded.block(1, 1, h, wd) = in[k];
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx)
        for (int o = 0; o < C; ++o) out[o] += w(o, k * 9 + ky * 3 + kx) * padded.block(ky, kx, h, wd);
  }
  return out;
}

// Adjoint of conv3x3 w.r.t. its input.
Planes conv3x3_backward(const Planes& grad_out, const Kernel& w) {
  const Index h = grad_out[0].rows(), wd = grad_out[0].cols();
  Planes grad_in;
  for (int k = 0; k < C; ++k) {
    Plane<double> padded = Plane<double>::Zero(h + 2, wd + 2);
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx)
        for (int o = 0; o < C; ++o) padded.block(ky, kx, h, wd) += w(o, k * 9 + ky * 3 + kx) * grad_out[o];
    grad_in[k] = padded.block(1, 1, h, wd);
  }
  return grad_in;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void fnv_mix(std::uint64_t& h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xFF;
    h *= 0x100000001B3ULL;
  }
}

}  // namespace

ToyWeights ToyWeights::from_seed(std::uint64_t seed) {
  DeterministicRng rng(seed);
  ToyWeights w;
  const double conv_scale = std::sqrt(2.0 / (C * 9));
  const double head_scale = std::sqrt(2.0 / C);
  for (int r = 0; r < w.conv1.rows(); ++r)
    for (int c = 0; c < w.conv1.cols(); ++c) w.conv1(r, c) = conv_scale * rng.gaussian();
  for (int r = 0; r < C; ++r) w.bias1(r) = 0.1 * rng.gaussian();
  for (int r = 0; r < w.conv2.rows(); ++r)
    for (int c = 0; c < w.conv2.cols(); ++c) w.conv2(r, c) = conv_scale * rng.gaussian();
  for (int r = 0; r < C; ++r) w.bias2(r) = 0.1 * rng.gaussian();
  for (int r = 0; r < K; ++r)
    for (int c = 0; c < C; ++c) w.heads(r, c) = head_scale * rng.gaussian();
  for (int r = 0; r < K; ++r) w.head_bias(r) = 0.1 * rng.gaussian();
  return w;
}

Plane<double> prompt_channel(Index height, Index width, const PointPrompt& prompt, double tau) {
  Plane<double> out(height, width);
  for (Index y = 0; y < height; ++y)
    for (Index x = 0; x < width; ++x) {
      const double dx = static_cast<double>(x - prompt.x), dy = static_cast<double>(y - prompt.y);
      out(y, x) = 1.0 / (1.0 + std::sqrt(dx * dx + dy * dy) / tau);
    }
  return out;
}

struct ToyBlobNet::Activations {
  Planes input, z1, a1, z2, a2;
  std::array<PredictionField, K> probs;
};

ToyBlobNet::ToyBlobNet(std::uint64_t seed) : weights_(ToyWeights::from_seed(seed)) {}
ToyBlobNet::ToyBlobNet(ToyWeights weights) : weights_(std::move(weights)) {}

SegmenterDescriptor ToyBlobNet::descriptor() const { return {"toy-blob-net", true, true}; }

ToyBlobNet::Activations ToyBlobNet::forward(const ImageTensor& image, const PointPrompt& prompt) const {
  if (!within(prompt, image.height(), image.width()))
    throw ConfigInvalid("prompt point outside the image");
  Activations act;
  for (int c = 0; c < 3; ++c) act.input[c] = image.channel(c);
  act.input[3] = prompt_channel(image.height(), image.width(), prompt, weights_.tau);
  act.z1 = conv3x3(act.input, weights_.conv1, weights_.bias1);
  for (int c = 0; c < C; ++c) act.a1[c] = act.z1[c].max(0.0);
  act.z2 = conv3x3(act.a1, weights_.conv2, weights_.bias2);
  for (int c = 0; c < C; ++c) act.a2[c] = act.z2[c].max(0.0);
  for (int k = 0; k < K; ++k) {
    Plane<double> logit = Plane<double>::Constant(image.height(), image.width(), weights_.head_bias(k));
    for (int c = 0; c < C; ++c) logit += weights_.heads(k, c) * act.a2[c];
    act.probs[k] = logit.unaryExpr([](double z) { return sigmoid(z); });
  }
  return act;
}

std::vector<MaskPrediction> ToyBlobNet::package(const Activations& act) const {
  std::vector<MaskPrediction> out;
  for (int k = 0; k < K; ++k) {
    MaskPrediction p;
    p.field = act.probs[k];
    p.mask = threshold(p.field);
    const Index n = p.mask.count();
    p.score = n ? p.mask.select(p.field, 0.0).sum() / static_cast<double>(n) : 0.0;
    out.push_back(std::move(p));
  }
  return out;
}

std::array<PredictionField, ToyWeights::kHeads> ToyBlobNet::fields(const ImageTensor& image,
                                                                   const PointPrompt& prompt) const {
  return forward(image, prompt).probs;
}

std::vector<MaskPrediction> ToyBlobNet::predict(const ImageTensor& image, const PointPrompt& prompt) {
  return package(forward(image, prompt));
}

InputGradient ToyBlobNet::input_gradient(const ImageTensor& image, const PointPrompt& prompt,
                                         const BinaryMask& truth, const LossSpec& loss,
                                         const std::optional<SegPgdStep>& segpgd,
                                         std::optional<std::size_t> head) {
  if (truth.rows() != image.height() || truth.cols() != image.width())
    throw ShapeMismatch("truth mask does not match the image");
  const auto act = forward(image, prompt);
  std::size_t target = head ? *head : highest_scored(package(act));
  if (target >= static_cast<std::size_t>(K)) throw ConfigInvalid("head index out of range");

  const auto& p = act.probs[target];
  const auto objective = attack_objective(p, truth, loss, segpgd);
  const Plane<double> grad_logit = objective.grad * p * (1.0 - p);

  Planes g2;
  for (int c = 0; c < C; ++c)
    g2[c] = (weights_.heads(static_cast<Index>(target), c) * grad_logit) * (act.z2[c] > 0.0).cast<double>();
  Planes g1 = conv3x3_backward(g2, weights_.conv2);
  for (int c = 0; c < C; ++c) g1[c] *= (act.z1[c] > 0.0).cast<double>();
  const Planes g0 = conv3x3_backward(g1, weights_.conv1);

  InputGradient out{objective.value, ImageTensor(image.height(), image.width())};
  for (int c = 0; c < 3; ++c) out.gradient.channel(c) = g0[c];
  return out;
}

std::optional<std::uint64_t> ToyBlobNet::piecewise_signature(const ImageTensor& image,
                                                             const PointPrompt& prompt) {
  const auto act = forward(image, prompt);
  std::uint64_t h = 0xCBF29CE484222325ULL;
  auto mix_bits = [&h](const auto& bits) {
    std::uint64_t word = 0;
    int n = 0;
    for (Index i = 0; i < bits.size(); ++i) {
      word = (word << 1) | (bits(i) ? 1u : 0u);
      if (++n == 64) {
        fnv_mix(h, word);
        word = 0;
        n = 0;
      }
    }
    fnv_mix(h, word);
  };
  for (int c = 0; c < C; ++c) mix_bits(act.z1[c] > 0.0);
  for (int c = 0; c < C; ++c) mix_bits(act.z2[c] > 0.0);
  for (int k = 0; k < K; ++k) {
    mix_bits(act.probs[k] > 0.5);
    mix_bits(act.probs[k] < kProbEps);
    mix_bits(act.probs[k] > 1.0 - kProbEps);
  }
  fnv_mix(h, highest_scored(package(act)));
  return h;
}

}  // namespace segrobust
