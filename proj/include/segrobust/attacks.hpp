#ifndef SEGROBUST_ATTACKS_HPP
#define SEGROBUST_ATTACKS_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "segrobust/losses.hpp"
#include "segrobust/model/segmenter.hpp"

namespace segrobust {

enum class AttackMethod { Fgsm, Bim, Pgd, SegPgd };

const char* to_string(AttackMethod m);
AttackMethod attack_method_from_string(const std::string& s);

inline constexpr std::array<double, 5> kDefaultEpsilonLadder = {0.5 / 255, 1.0 / 255, 2.0 / 255, 4.0 / 255,
                                                                8.0 / 255};

struct AttackConfig {
  AttackMethod method = AttackMethod::Pgd;
  double epsilon = 8.0 / 255;
  double step_size = 1.0 / 255;
  int steps = 10;
  LossSpec loss;
  std::uint64_t seed = 0;
  // Attack the mask chosen at the clean image for every step instead of
  // re-selecting the highest-scored mask each step.
  bool fix_target_head = false;

  // FGSM gets a single step, the others 10 steps of 1/255.
  static AttackConfig defaults(AttackMethod method, double epsilon, std::uint64_t seed = 0);
  void validate() const;
};

// delta clamped to [-eps, eps], then image + delta clamped to [0, 1].
ImageTensor project_linf(const ImageTensor& delta, double epsilon, const ImageTensor& image);

// Clamp of sign-gradient ascent: clamp(I + eps * sign(grad J), 0, 1), sign(0) = 0.
ImageTensor fgsm(const ImageTensor& image, const PointPrompt& prompt, const BinaryMask& truth,
                 Segmenter& model, const AttackConfig& config);

// Called after every projected iterate with the 1-based step index.
using IterateObserver = std::function<void(int step, const ImageTensor& adversarial)>;

// BIM (zero start), PGD and SegPGD (uniform start in the eps box). Each step
// ascends the objective by step_size * sign(grad) and projects back.
ImageTensor iterative_attack(const ImageTensor& image, const PointPrompt& prompt, const BinaryMask& truth,
                             Segmenter& model, const AttackConfig& config,
                             const IterateObserver& observer = {});

ImageTensor run_attack(const ImageTensor& image, const PointPrompt& prompt, const BinaryMask& truth,
                       Segmenter& model, const AttackConfig& config);

struct SweepCell {
  AttackMethod method;
  double epsilon;
  std::uint64_t seed;
  std::optional<ImageTensor> adversarial;
  std::string error;  // non-empty when the cell failed
};

// methods x epsilons in row-major order; cell i uses derive_seed(base.seed, i).
// A failing cell records its error and the sweep continues.
std::vector<SweepCell> attack_sweep(const ImageTensor& image, const PointPrompt& prompt, const BinaryMask& truth,
                                    Segmenter& model, const std::vector<AttackMethod>& methods,
                                    const std::vector<double>& epsilons, const AttackConfig& base);

}  // namespace segrobust

#endif  // SEGROBUST_ATTACKS_HPP
