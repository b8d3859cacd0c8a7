#ifndef SEGROBUST_LOSSES_HPP
#define SEGROBUST_LOSSES_HPP

#include <cmath>
#include <optional>
#include <string>

#include "segrobust/core/types.hpp"

namespace segrobust {

enum class LossKind { FocalDice, Mse };

struct LossSpec {
  LossKind kind = LossKind::FocalDice;
  double focal_weight = 20.0;
  double dice_weight = 1.0;
  double focal_gamma = 2.0;
  double focal_alpha = 0.25;
  double dice_smooth = 1.0;
  bool segpgd_weighting = false;

  void validate() const {
    if (!(focal_weight >= 0) || !(dice_weight >= 0))
      throw ConfigInvalid("loss weights must be non-negative");
    if (!(focal_gamma >= 0)) throw ConfigInvalid("focal gamma must be non-negative");
    if (!(focal_alpha >= 0 && focal_alpha <= 1)) throw ConfigInvalid("focal alpha must lie in [0,1]");
    if (!(dice_smooth > 0)) throw ConfigInvalid("dice smooth must be positive");
  }
  bool operator==(const LossSpec&) const = default;
};

inline const char* to_string(LossKind k) { return k == LossKind::FocalDice ? "focal_dice" : "mse"; }

inline LossKind loss_kind_from_string(const std::string& s) {
  if (s == "focal_dice") return LossKind::FocalDice;
  if (s == "mse") return LossKind::Mse;
  throw UnknownKind("unknown loss kind '" + s + "'");
}

// Step t of T, 1-based, for the correct/wrong pixel reweighting.
struct SegPgdStep {
  int t = 1;
  int total = 1;
  bool operator==(const SegPgdStep&) const = default;
};

// Scalar loss with its gradient w.r.t. every probability.
template <typename Scalar>
struct LossValue {
  Scalar value{};
  ProbField<Scalar> grad;
};

// Per-pixel loss terms (not reduced) with d value(i) / d p(i).
template <typename Scalar>
struct PixelLoss {
  ProbField<Scalar> values;
  ProbField<Scalar> grads;
};

inline constexpr double kProbEps = 1e-7;

namespace detail {
template <typename Scalar>
void check_shapes(const ProbField<Scalar>& pred, const BinaryMask& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
    throw ShapeMismatch("loss: prediction and truth shapes differ");
}
}  // namespace detail

// -alpha_t (1 - p_t)^gamma log p_t per pixel with p clamped to [eps, 1-eps];
// the clamp contributes a zero derivative outside its range.
template <typename Scalar>
PixelLoss<Scalar> focal_pixel_loss(const ProbField<Scalar>& pred, const BinaryMask& truth,
                                   Scalar gamma, Scalar alpha) {
  detail::check_shapes(pred, truth);
  const Scalar eps(kProbEps);
  PixelLoss<Scalar> out{ProbField<Scalar>(pred.rows(), pred.cols()),
                        ProbField<Scalar>(pred.rows(), pred.cols())};
  for (Index i = 0; i < pred.size(); ++i) {
    const Scalar raw = pred(i);
    const Scalar p = std::min(std::max(raw, eps), Scalar(1) - eps);
    const bool clamped = raw < eps || raw > Scalar(1) - eps;
    Scalar value, dvalue;
    if (truth(i)) {
      const Scalar q = Scalar(1) - p;
      const Scalar qg = std::pow(q, gamma);
      value = -alpha * qg * std::log(p);
      dvalue = gamma == Scalar(0) ? -alpha / p
                                  : alpha * (gamma * std::pow(q, gamma - 1) * std::log(p) - qg / p);
    } else {
      const Scalar q = Scalar(1) - p;
      const Scalar pg = std::pow(p, gamma);
      value = -(Scalar(1) - alpha) * pg * std::log(q);
      dvalue = gamma == Scalar(0)
                   ? (Scalar(1) - alpha) / q
                   : (Scalar(1) - alpha) * (pg / q - gamma * std::pow(p, gamma - 1) * std::log(q));
    }
    out.values(i) = value;
    out.grads(i) = clamped ? Scalar(0) : dvalue;
  }
  return out;
}

template <typename Scalar>
LossValue<Scalar> focal_loss(const ProbField<Scalar>& pred, const BinaryMask& truth,
                             Scalar gamma = Scalar(2), Scalar alpha = Scalar(0.25)) {
  const auto px = focal_pixel_loss(pred, truth, gamma, alpha);
  const Scalar n = static_cast<Scalar>(pred.size());
  return {px.values.sum() / n, (px.grads / n).eval()};
}

// Soft dice: 1 - (2 sum(p t) + s) / (sum p + sum t + s).
template <typename Scalar>
LossValue<Scalar> dice_loss(const ProbField<Scalar>& pred, const BinaryMask& truth,
                            Scalar smooth = Scalar(1)) {
  detail::check_shapes(pred, truth);
  const ProbField<Scalar> t = truth.template cast<Scalar>();
  const Scalar inter = Scalar(2) * (pred * t).sum() + smooth;
  const Scalar denom = pred.sum() + t.sum() + smooth;
  LossValue<Scalar> out;
  out.value = Scalar(1) - inter / denom;
  out.grad = -(Scalar(2) * t * denom - inter) / (denom * denom);
  return out;
}

template <typename Scalar>
PixelLoss<Scalar> squared_error_pixel_loss(const ProbField<Scalar>& pred, const BinaryMask& truth) {
  detail::check_shapes(pred, truth);
  const ProbField<Scalar> diff = pred - truth.template cast<Scalar>();
  return {diff.square().eval(), (Scalar(2) * diff).eval()};
}

template <typename Scalar>
LossValue<Scalar> mse_loss(const ProbField<Scalar>& pred, const BinaryMask& truth) {
  const auto px = squared_error_pixel_loss(pred, truth);
  const Scalar n = static_cast<Scalar>(pred.size());
  return {px.values.sum() / n, (px.grads / n).eval()};
}

// focal_weight * focal + dice_weight * dice, or plain MSE.
template <typename Scalar>
LossValue<Scalar> composite_loss(const ProbField<Scalar>& pred, const BinaryMask& truth,
                                 const LossSpec& spec) {
  if (spec.kind == LossKind::Mse) return mse_loss(pred, truth);
  const auto focal = focal_loss(pred, truth, Scalar(spec.focal_gamma), Scalar(spec.focal_alpha));
  const auto dice = dice_loss(pred, truth, Scalar(spec.dice_smooth));
  const Scalar wf(spec.focal_weight), wd(spec.dice_weight);
  return {wf * focal.value + wd * dice.value, (wf * focal.grad + wd * dice.grad).eval()};
}

// Pixel-decomposable part of the objective used as the reweighting base:
// weighted focal terms for focal_dice (dice is not per-pixel), squared error for mse.
template <typename Scalar>
PixelLoss<Scalar> base_pixel_loss(const ProbField<Scalar>& pred, const BinaryMask& truth,
                                  const LossSpec& spec) {
  if (spec.kind == LossKind::Mse) return squared_error_pixel_loss(pred, truth);
  auto px = focal_pixel_loss(pred, truth, Scalar(spec.focal_gamma), Scalar(spec.focal_alpha));
  px.values *= Scalar(spec.focal_weight);
  px.grads *= Scalar(spec.focal_weight);
  return px;
}

inline double segpgd_lambda(int t, int total) {
  if (total < 1 || t < 1 || t > total)
    throw StepOutOfRange("segpgd step " + std::to_string(t) + " outside [1, " +
                         std::to_string(total) + "]");
  return static_cast<double>(t - 1) / (2.0 * total);
}

// (1 - lambda) * mean over correctly classified pixels + lambda * mean over
// misclassified ones, classification at p > 0.5. Empty groups contribute 0.
template <typename Scalar>
LossValue<Scalar> segpgd_weighted_loss(const ProbField<Scalar>& pred, const BinaryMask& truth,
                                       int t, int total, const PixelLoss<Scalar>& base) {
  detail::check_shapes(pred, truth);
  if (base.values.rows() != pred.rows() || base.values.cols() != pred.cols())
    throw ShapeMismatch("segpgd: base loss field shape differs");
  const Scalar lambda(segpgd_lambda(t, total));
  const BinaryMask correct = (pred > Scalar(0.5)) == truth;
  const Index n_correct = correct.count();
  const Index n_wrong = correct.size() - n_correct;
  const Scalar w_correct = n_correct ? (Scalar(1) - lambda) / Scalar(n_correct) : Scalar(0);
  const Scalar w_wrong = n_wrong ? lambda / Scalar(n_wrong) : Scalar(0);
  const ProbField<Scalar> weights = correct.select(ProbField<Scalar>::Constant(pred.rows(), pred.cols(), w_correct),
                                                   ProbField<Scalar>::Constant(pred.rows(), pred.cols(), w_wrong));
  return {(weights * base.values).sum(), (weights * base.grads).eval()};
}

// The objective an attack ascends at one step.
template <typename Scalar>
LossValue<Scalar> attack_objective(const ProbField<Scalar>& pred, const BinaryMask& truth,
                                   const LossSpec& spec, const std::optional<SegPgdStep>& step) {
  if (step)
    return segpgd_weighted_loss(pred, truth, step->t, step->total, base_pixel_loss(pred, truth, spec));
  return composite_loss(pred, truth, spec);
}

}  // namespace segrobust

#endif  // SEGROBUST_LOSSES_HPP
