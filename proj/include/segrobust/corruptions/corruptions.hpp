#ifndef SEGROBUST_CORRUPTIONS_CORRUPTIONS_HPP
#define SEGROBUST_CORRUPTIONS_CORRUPTIONS_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "segrobust/core/types.hpp"

namespace segrobust {

enum class CorruptionKind {
  GaussianNoise,
  ShotNoise,
  ImpulseNoise,
  DefocusBlur,
  GlassBlur,
  MotionBlur,
  ZoomBlur,
  Snow,
  Frost,
  Fog,
  Brightness,
  Contrast,
  Elastic,
  Pixelate,
  Jpeg,
};

inline constexpr std::array<CorruptionKind, 15> kAllCorruptions = {
    CorruptionKind::GaussianNoise, CorruptionKind::ShotNoise,  CorruptionKind::ImpulseNoise,
    CorruptionKind::DefocusBlur,   CorruptionKind::GlassBlur,  CorruptionKind::MotionBlur,
    CorruptionKind::ZoomBlur,      CorruptionKind::Snow,       CorruptionKind::Frost,
    CorruptionKind::Fog,           CorruptionKind::Brightness, CorruptionKind::Contrast,
    CorruptionKind::Elastic,       CorruptionKind::Pixelate,   CorruptionKind::Jpeg,
};

const char* to_string(CorruptionKind kind);
CorruptionKind corruption_kind_from_string(const std::string& name);  // throws UnknownKind

bool is_noise(CorruptionKind kind);
bool is_blur(CorruptionKind kind);

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::GaussianNoise;
  int severity = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

// Numeric constants of every (kind, severity) cell, keyed by parameter name.
class CorruptionParamTable {
 public:
  using Params = std::map<std::string, double>;

  // JSON: {"version": 1, "<kind>": {"<severity>": {"<param>": value, ...}, ...}, ...}.
  static CorruptionParamTable from_json(const std::string& text);
  static CorruptionParamTable load(const std::filesystem::path& path);
  // The table shipped in config/corruption_params.json, compiled in.
  static const CorruptionParamTable& builtin();

  // Complete 15 x 5 grid, finite values, required parameters present and
  // monotone in severity along each kernel's intensity direction.
  void validate() const;

  const Params& at(CorruptionKind kind, int severity) const;
  double param(CorruptionKind kind, int severity, const std::string& name) const;
  int version() const { return version_; }

 private:
  int version_ = 0;
  std::map<CorruptionKind, std::array<Params, 5>> cells_;
  std::map<CorruptionKind, std::array<bool, 5>> present_;
};

// Corrupted copy of `image`; same shape, values in [0,1]. Stochastic kinds
// draw only from DeterministicRng(spec.seed).
ImageTensor apply_corruption(const ImageTensor& image, const CorruptionSpec& spec,
                             const CorruptionParamTable& table = CorruptionParamTable::builtin());

// Severities 1..5, severity k seeded with derive_seed(seed, k).
std::vector<ImageTensor> severity_profile(const ImageTensor& image, CorruptionKind kind, std::uint64_t seed,
                                          const CorruptionParamTable& table = CorruptionParamTable::builtin());

}  // namespace segrobust

#endif  // SEGROBUST_CORRUPTIONS_CORRUPTIONS_HPP
