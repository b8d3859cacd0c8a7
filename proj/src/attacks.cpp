#include "segrobust/attacks.hpp"

#include "segrobust/core/rng.hpp"

namespace segrobust {

namespace {

ImageTensor::Pixels sign_of(const ImageTensor::Pixels& g) {
  return (g > 0.0).cast<double>() - (g < 0.0).cast<double>();
}

ImageTensor::Pixels checked_gradient(const InputGradient& g, const ImageTensor& image) {
  if (!g.gradient.same_shape(image)) throw ModelError("gradient shape differs from the image");
  if (!g.gradient.pixels().allFinite()) throw NonFiniteGradient("model returned a non-finite gradient");
  return g.gradient.pixels();
}

}  // namespace

const char* to_string(AttackMethod m) {
  switch (m) {
    case AttackMethod::Fgsm: return "fgsm";
    case AttackMethod::Bim: return "bim";
    case AttackMethod::Pgd: return "pgd";
    case AttackMethod::SegPgd: return "segpgd";
  }
  return "?";
}

AttackMethod attack_method_from_string(const std::string& s) {
  if (s == "fgsm") return AttackMethod::Fgsm;
  if (s == "bim") return AttackMethod::Bim;
  if (s == "pgd") return AttackMethod::Pgd;
  if (s == "segpgd") return AttackMethod::SegPgd;
  throw UnknownKind("unknown attack method '" + s + "'");
}

AttackConfig AttackConfig::defaults(AttackMethod method, double epsilon, std::uint64_t seed) {
  AttackConfig c;
  c.method = method;
  c.epsilon = epsilon;
  c.seed = seed;
  c.steps = method == AttackMethod::Fgsm ? 1 : 10;
  c.loss.segpgd_weighting = method == AttackMethod::SegPgd;
  return c;
}

void AttackConfig::validate() const {
  if (!(epsilon > 0 && epsilon <= 1)) throw ConfigInvalid("epsilon must lie in (0, 1]");
  if (method == AttackMethod::Fgsm && steps != 1) throw ConfigInvalid("fgsm takes exactly one step");
  if (steps < 0) throw ConfigInvalid("steps must be non-negative");
  if (method != AttackMethod::Fgsm && !(step_size > 0)) throw ConfigInvalid("step size must be positive");
  loss.validate();
}

ImageTensor project_linf(const ImageTensor& delta, double epsilon, const ImageTensor& image) {
  if (!delta.same_shape(image)) throw ShapeMismatch("perturbation and image shapes differ");
  ImageTensor out = delta;
  out.pixels() = delta.pixels().max(-epsilon).min(epsilon);
  out.pixels() = (image.pixels() + out.pixels()).max(0.0).min(1.0) - image.pixels();
  return out;
}

ImageTensor fgsm(const ImageTensor& image, const PointPrompt& prompt, const BinaryMask& truth,
                 Segmenter& model, const AttackConfig& config) {
  config.validate();
  const auto g = checked_gradient(model.input_gradient(image, prompt, truth, config.loss, std::nullopt), image);
  ImageTensor out = image;
  out.pixels() = (image.pixels() + config.epsilon * sign_of(g)).max(0.0).min(1.0);
  return out;
}

ImageTensor iterative_attack(const ImageTensor& image, const PointPrompt& prompt, const BinaryMask& truth,
                             Segmenter& model, const AttackConfig& config, const IterateObserver& observer) {
  config.validate();
  if (config.method == AttackMethod::Fgsm) throw ConfigInvalid("iterative_attack does not run fgsm");

  // Iterate in image space against the feasible box
  // [max(I - eps, 0), min(I + eps, 1)], which equals projecting the
  // perturbation onto the eps ball and the pixel range.
  const ImageTensor::Pixels lo = (image.pixels() - config.epsilon).max(0.0);
  const ImageTensor::Pixels hi = (image.pixels() + config.epsilon).min(1.0);
  ImageTensor adv = image;
  if (config.method != AttackMethod::Bim) {
    DeterministicRng rng(config.seed);
    double* x = adv.data();
    for (Index i = 0; i < adv.size(); ++i) x[i] += rng.uniform(-config.epsilon, config.epsilon);
    adv.pixels() = adv.pixels().max(lo).min(hi);
  }

  std::optional<std::size_t> head;
  if (config.fix_target_head) head = highest_scored(model.predict(image, prompt));

  for (int t = 1; t <= config.steps; ++t) {
    std::optional<SegPgdStep> step;
    if (config.method == AttackMethod::SegPgd) step = SegPgdStep{t, config.steps};
    const auto g = checked_gradient(model.input_gradient(adv, prompt, truth, config.loss, step, head), image);
    adv.pixels() = (adv.pixels() + config.step_size * sign_of(g)).max(lo).min(hi);
    if (observer) observer(t, adv);
  }
  return adv;
}

ImageTensor run_attack(const ImageTensor& image, const PointPrompt& prompt, const BinaryMask& truth,
                       Segmenter& model, const AttackConfig& config) {
  if (config.method == AttackMethod::Fgsm) return fgsm(image, prompt, truth, model, config);
  return iterative_attack(image, prompt, truth, model, config);
}

std::vector<SweepCell> attack_sweep(const ImageTensor& image, const PointPrompt& prompt, const BinaryMask& truth,
                                    Segmenter& model, const std::vector<AttackMethod>& methods,
                                    const std::vector<double>& epsilons, const AttackConfig& base) {
  std::vector<SweepCell> cells;
  std::uint64_t ordinal = 0;
  for (const auto method : methods)
    for (const double eps : epsilons) {
      SweepCell cell{method, eps, derive_seed(base.seed, ordinal++), std::nullopt, {}};
      AttackConfig config = base;
      config.method = method;
      config.epsilon = eps;
      config.seed = cell.seed;
      config.loss.segpgd_weighting = method == AttackMethod::SegPgd;
      if (method == AttackMethod::Fgsm) config.steps = 1;
      try {
        cell.adversarial = run_attack(image, prompt, truth, model, config);
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
      cells.push_back(std::move(cell));
    }
  return cells;
}

}  // namespace segrobust
