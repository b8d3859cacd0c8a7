#ifndef SEGROBUST_HARNESS_EVALUATE_HPP
#define SEGROBUST_HARNESS_EVALUATE_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "segrobust/core/rng.hpp"
#include "segrobust/harness/conditions.hpp"
#include "segrobust/metrics.hpp"
#include "segrobust/model/segmenter.hpp"

namespace segrobust {

struct ModelSource {
  std::string name;
  SegmenterFactory factory;
  // Bind an OracleSegmenter over each image's annotations instead of
  // calling the factory.
  bool ground_truth_oracle = false;
};

struct RunConfig {
  std::filesystem::path manifest;
  ModelSource model;
  std::vector<Condition> conditions;
  std::uint64_t master_seed = 0;
  std::filesystem::path output_dir;  // empty: nothing written
  int workers = 1;
  SplitMode split = SplitMode::Off;
  std::vector<std::string> report_formats = {"json", "csv"};
  bool overlays = false;

  void validate() const;
};

// Step 1 output, shared by every condition of one image.
struct PromptSelection {
  std::size_t annotation = 0;
  PointPrompt point;
};

// Uniform annotation among the split's survivors, then a uniform point in
// it. Empty when the split keeps nothing.
std::optional<PromptSelection> select_prompt(const AnnotatedImage& record, SplitMode split,
                                             DeterministicRng& rng);

// Step 2 transform. Attacks use `truth` as the target mask.
ImageTensor apply_condition(const ImageTensor& image, const Condition& condition, const PointPrompt& point,
                            const BinaryMask& truth, Segmenter& model, std::uint64_t seed);

struct ConditionResult {
  EvalRecord record;
  ImageTensor input;
  std::vector<MaskPrediction> predictions;
};

// Steps 2 and 3 for a fixed selection.
ConditionResult evaluate_condition(const AnnotatedImage& record, Segmenter& model, const Condition& condition,
                                   const PromptSelection& selection, std::uint64_t seed);

// Steps 1 to 3: selection from `rng`, then the condition seeded with the
// next draw. Empty when the image is skipped by the split.
std::optional<EvalRecord> evaluate_image(const AnnotatedImage& record, Segmenter& model,
                                         const Condition& condition, DeterministicRng& rng,
                                         SplitMode split = SplitMode::Off);

// Seeds used by evaluate_dataset: image i gets the i-th (0-based) draw of
// DeterministicRng(master_seed); condition c of an image derive_seed(image_seed, c).
std::uint64_t image_seed(std::uint64_t master_seed, std::size_t image_index);
std::uint64_t condition_seed(std::uint64_t image_seed, std::size_t condition_index);

struct SkipRecord {
  std::string image_id;
  std::string reason;
  bool operator==(const SkipRecord&) const = default;
};

struct Provenance {
  std::uint64_t master_seed = 0;
  std::string config_hash;
  std::string code_version;
  std::string model;
  std::string split;
  std::vector<std::string> conditions;
  std::map<std::string, std::uint64_t> image_seeds;
  bool operator==(const Provenance&) const = default;
};

struct ReportBundle {
  std::vector<EvalRecord> aggregates;  // one per condition with rows, in condition order
  std::vector<EvalRecord> rows;        // image-major, condition-minor
  std::vector<SkipRecord> skips;
  // Per condition, the number of rows whose IoU-best mask misses the prompt
  // point. Recorded, not enforced.
  std::map<std::string, std::size_t> point_misses;
  Provenance provenance;

  // Throws ConfigInvalid unless every aggregate equals the mean of its rows to 1e-12.
  void verify() const;
  bool operator==(const ReportBundle&) const = default;
};

// Runs every condition on every image of the manifest. Per-image seeds come
// from the master seed, so the bundle does not depend on `workers`. Writes
// the requested formats to output_dir when it is set.
ReportBundle evaluate_dataset(const RunConfig& config);

// Same protocol over in-memory records.
ReportBundle evaluate_records(const std::vector<AnnotatedImage>& records, const RunConfig& config);

}  // namespace segrobust

#endif  // SEGROBUST_HARNESS_EVALUATE_HPP
