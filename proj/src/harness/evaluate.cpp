#include "segrobust/harness/evaluate.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <set>
#include <thread>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "segrobust/core/image_io.hpp"
#include "segrobust/core/manifest.hpp"
#include "segrobust/harness/overlay.hpp"
#include "segrobust/harness/report.hpp"
#include "segrobust/model/oracle_segmenter.hpp"

namespace segrobust {

void RunConfig::validate() const {
  if (conditions.empty()) throw ConfigInvalid("run config: at least one condition is required");
  if (workers < 1) throw ConfigInvalid("run config: workers must be at least 1");
  if (!model.ground_truth_oracle && !model.factory) throw ConfigInvalid("run config: no model");
  std::set<std::string> tags;
  for (const auto& c : conditions) {
    c.validate();
    if (!tags.insert(c.tag()).second) throw ConfigInvalid("run config: duplicate condition " + c.tag());
  }
  for (const auto& f : report_formats)
    if (f != "json" && f != "csv") throw ConfigInvalid("run config: unknown report format '" + f + "'");
}

std::optional<PromptSelection> select_prompt(const AnnotatedImage& record, SplitMode split, DeterministicRng& rng) {
  const auto kept = big_small_filter(record, split);
  if (kept.empty()) return std::nullopt;
  PromptSelection s;
  s.annotation = kept[static_cast<std::size_t>(rng.below(kept.size()))];
  s.point = sample_point_in_mask(record.annotations[s.annotation].mask, rng);
  return s;
}

ImageTensor apply_condition(const ImageTensor& image, const Condition& condition, const PointPrompt& point,
                            const BinaryMask& truth, Segmenter& model, std::uint64_t seed) {
  switch (condition.type) {
    case Condition::Type::Clean:
      return image;
    case Condition::Type::Corruption:
      return apply_corruption(image, {condition.corruption, condition.severity, seed});
    case Condition::Type::Attack: {
      AttackConfig config = condition.attack;
      config.seed = seed;
      ImageTensor adv = run_attack(image, point, truth, model, config);
      return condition.quantize ? quantize_8bit(adv) : adv;
    }
  }
  return image;
}

ConditionResult evaluate_condition(const AnnotatedImage& record, Segmenter& model, const Condition& condition,
                                   const PromptSelection& selection, std::uint64_t seed) {
  const BinaryMask& truth = record.annotations.at(selection.annotation).mask;
  ConditionResult r;
  r.input = apply_condition(record.image, condition, selection.point, truth, model, seed);
  r.predictions = model.predict(r.input, selection.point);
  validate_predictions(r.predictions, r.input.height(), r.input.width());
  r.record = evaluate_masks(masks_of(r.predictions), truth);
  r.record.image_id = record.id;
  r.record.condition = condition.tag();
  return r;
}

std::optional<EvalRecord> evaluate_image(const AnnotatedImage& record, Segmenter& model, const Condition& condition,
                                         DeterministicRng& rng, SplitMode split) {
  const auto selection = select_prompt(record, split, rng);
  if (!selection) return std::nullopt;
  return evaluate_condition(record, model, condition, *selection, rng.next_u64()).record;
}

std::uint64_t image_seed(std::uint64_t master_seed, std::size_t image_index) {
  // The image_index-th draw of DeterministicRng(master_seed), by jumping the
  // SplitMix64 counter instead of stepping through the earlier draws.
  DeterministicRng rng(master_seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(image_index));
  return rng.next_u64();
}

std::uint64_t condition_seed(std::uint64_t image_seed, std::size_t condition_index) {
  return derive_seed(image_seed, condition_index);
}

namespace {

bool near(double a, double b) { return std::abs(a - b) <= 1e-12; }

std::string file_safe(std::string tag) {
  for (char& ch : tag)
    if (ch == ':' || ch == '/') ch = '_';
  return tag;
}

struct ImageSlot {
  std::string id;
  std::optional<SkipRecord> skip;
  std::vector<EvalRecord> rows;
  std::vector<bool> point_missed;
  std::exception_ptr error;
};

using RecordLoader = std::function<AnnotatedImage(std::size_t)>;

void evaluate_one(std::size_t index, const AnnotatedImage& record, Segmenter* shared, const RunConfig& config,
                  ImageSlot& slot) {
  slot.id = record.id;
  const std::uint64_t seed = image_seed(config.master_seed, index);
  DeterministicRng rng(seed);
  const auto selection = select_prompt(record, config.split, rng);
  if (!selection) {
    slot.skip = SkipRecord{record.id, std::string("no annotation left by the ") + to_string(config.split) + " split"};
    return;
  }
  const auto& truth = record.annotations[selection->annotation].mask;
  if (truth.all()) {
    slot.skip = SkipRecord{record.id, "selected annotation covers the whole image"};
    return;
  }

  std::unique_ptr<Segmenter> oracle;
  Segmenter* model = shared;
  if (config.model.ground_truth_oracle) {
    std::vector<BinaryMask> masks;
    for (const auto& a : record.annotations) masks.push_back(a.mask);
    oracle = std::make_unique<OracleSegmenter>(std::move(masks));
    model = oracle.get();
  }

  for (std::size_t c = 0; c < config.conditions.size(); ++c) {
    auto result = evaluate_condition(record, *model, config.conditions[c], *selection, condition_seed(seed, c));
    const auto& best = result.predictions[static_cast<std::size_t>(result.record.iou_mask_index)].mask;
    slot.point_missed.push_back(!best(selection->point.y, selection->point.x));
    if (config.overlays && !config.output_dir.empty()) {
      write_overlay(config.output_dir / "overlays" / file_safe(record.id) /
                        (file_safe(result.record.condition) + ".png"),
                    result.input, best, truth, selection->point);
    }
    slot.rows.push_back(std::move(result.record));
  }
}

ReportBundle evaluate_indexed(std::size_t count, const RecordLoader& load, const RunConfig& config) {
  config.validate();
  if (count == 0) throw EmptyDataset("dataset has no images");

  std::vector<ImageSlot> slots(count);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(config.workers), count);

  std::unique_ptr<Segmenter> primary;
  bool shareable = true;
  if (!config.model.ground_truth_oracle) {
    primary = config.model.factory();
    shareable = primary->descriptor().concurrent_safe;
  }

  auto work = [&](Segmenter* model) {
    while (!stop.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        evaluate_one(i, load(i), model, config, slots[i]);
        if (slots[i].skip) spdlog::info("skipping {}: {}", slots[i].skip->image_id, slots[i].skip->reason);
      } catch (...) {
        slots[i].error = std::current_exception();
        stop.store(true);
      }
    }
  };

  std::vector<std::unique_ptr<Segmenter>> pool;
  std::vector<std::thread> threads;
  std::exception_ptr setup_error;
  for (std::size_t w = 1; w < workers; ++w) {
    Segmenter* model = primary.get();
    if (primary && !shareable) {
      try {
        pool.push_back(config.model.factory());
      } catch (...) {
        setup_error = std::current_exception();
        stop.store(true);
        break;
      }
      model = pool.back().get();
    }
    threads.emplace_back(work, model);
  }
  work(primary.get());
  for (auto& t : threads) t.join();
  if (setup_error) std::rethrow_exception(setup_error);
  for (const auto& s : slots)
    if (s.error) std::rethrow_exception(s.error);

  ReportBundle bundle;
  bundle.provenance.master_seed = config.master_seed;
  bundle.provenance.code_version = kCodeVersion;
  bundle.provenance.model = config.model.ground_truth_oracle ? "oracle-gt-echo" : config.model.name;
  bundle.provenance.split = to_string(config.split);
  for (const auto& c : config.conditions) {
    bundle.provenance.conditions.push_back(c.tag());
    bundle.point_misses[c.tag()] = 0;
  }

  nlohmann::json identity;
  identity["model"] = bundle.provenance.model;
  identity["split"] = bundle.provenance.split;
  identity["master_seed"] = config.master_seed;
  identity["conditions"] = bundle.provenance.conditions;
  identity["images"] = nlohmann::json::array();
  for (std::size_t i = 0; i < count; ++i) {
    identity["images"].push_back(slots[i].id);
    bundle.provenance.image_seeds[slots[i].id] = image_seed(config.master_seed, i);
  }
  bundle.provenance.config_hash = fnv1a_hex(identity.dump());

  std::vector<std::vector<EvalRecord>> by_condition(config.conditions.size());
  for (auto& s : slots) {
    if (s.skip) {
      bundle.skips.push_back(*s.skip);
      continue;
    }
    for (std::size_t c = 0; c < s.rows.size(); ++c) {
      by_condition[c].push_back(s.rows[c]);
      if (s.point_missed[c]) ++bundle.point_misses[s.rows[c].condition];
    }
    for (auto& r : s.rows) bundle.rows.push_back(std::move(r));
  }
  for (std::size_t c = 0; c < by_condition.size(); ++c)
    if (!by_condition[c].empty()) bundle.aggregates.push_back(dataset_mean(by_condition[c]));
  if (bundle.aggregates.empty()) throw EmptyDataset("every image was skipped");

  if (!config.output_dir.empty()) emit_report(bundle, config.output_dir, config.report_formats);
  return bundle;
}

}  // namespace

void ReportBundle::verify() const {
  std::set<std::string> seen;
  for (const auto& agg : aggregates) {
    if (!seen.insert(agg.condition).second) throw ConfigInvalid("report: duplicate aggregate " + agg.condition);
    std::vector<EvalRecord> members;
    for (const auto& r : rows)
      if (r.condition == agg.condition) members.push_back(r);
    if (members.empty()) throw ConfigInvalid("report: aggregate " + agg.condition + " has no rows");
    const EvalRecord m = dataset_mean(members);
    if (!(near(m.pa_fg, agg.pa_fg) && near(m.pa_bg, agg.pa_bg) && near(m.iou_fg, agg.iou_fg) &&
          near(m.iou_bg, agg.iou_bg) && near(m.mpa, agg.mpa) && near(m.miou, agg.miou)))
      throw ConfigInvalid("report: aggregate " + agg.condition + " differs from the mean of its rows");
  }
  for (const auto& r : rows)
    if (!seen.count(r.condition)) throw ConfigInvalid("report: row condition " + r.condition + " has no aggregate");
}

ReportBundle evaluate_records(const std::vector<AnnotatedImage>& records, const RunConfig& config) {
  return evaluate_indexed(records.size(), [&](std::size_t i) { return records[i]; }, config);
}

ReportBundle evaluate_dataset(const RunConfig& config) {
  const DatasetManifest manifest = load_manifest(config.manifest, ManifestCheck::SchemaOnly);
  return evaluate_indexed(manifest.records.size(), [&](std::size_t i) { return load_record(manifest, i); }, config);
}

}  // namespace segrobust
