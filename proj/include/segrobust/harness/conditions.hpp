#ifndef SEGROBUST_HARNESS_CONDITIONS_HPP
#define SEGROBUST_HARNESS_CONDITIONS_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "segrobust/attacks.hpp"
#include "segrobust/core/types.hpp"
#include "segrobust/corruptions/corruptions.hpp"

namespace segrobust {

enum class SplitMode { Off, Big, Small };

const char* to_string(SplitMode mode);
// Accepts off|big|small and the long forms big_top_half|small_bottom_half.
SplitMode split_mode_from_string(const std::string& s);

// Annotation indices kept by the split: sorted by area descending (ties by
// index), big is the first ceil(n/2), small the remaining floor(n/2).
std::vector<std::size_t> big_small_filter(const std::vector<Index>& areas, SplitMode mode);
std::vector<std::size_t> big_small_filter(const AnnotatedImage& record, SplitMode mode);

// One transform applied to an image before prediction. Seeds are not part
// of a condition; they are derived per image at evaluation time.
struct Condition {
  enum class Type { Clean, Corruption, Attack };

  Type type = Type::Clean;
  CorruptionKind corruption = CorruptionKind::GaussianNoise;
  int severity = 1;
  AttackConfig attack;
  // Round the attacked image to 8-bit before predicting.
  bool quantize = false;

  static Condition clean();
  static Condition corrupted(CorruptionKind kind, int severity);
  static Condition attacked(const AttackConfig& config, bool quantize = false);

  // "clean", "corruption:fog:3", "attack:pgd:8/255:focal_dice[:q8]".
  std::string tag() const;
  void validate() const;
};

// Epsilon as a multiple of 1/255 in shortest form, e.g. "0.5/255".
std::string epsilon_label(double epsilon);

// Conditions file:
//   {"clean": true,
//    "corruptions": [{"kinds": "all" | [..], "severities": "all" | [..]}],
//    "attacks": [{"methods": [..], "eps": [.. in 1/255 units], "loss": "focal_dice",
//                 "steps": 10, "step_size": 1, "fix_target_head": false,
//                 "quantize": false, "segpgd_weighting": true}]}
// Clean first, then corruptions in listed order, then attacks.
std::vector<Condition> conditions_from_json(const std::string& text);
std::vector<Condition> load_conditions(const std::filesystem::path& path);

// Clean plus every kind x severity: 76 conditions.
std::vector<Condition> full_corruption_grid();

}  // namespace segrobust

#endif  // SEGROBUST_HARNESS_CONDITIONS_HPP
