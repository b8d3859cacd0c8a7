#ifndef SEGROBUST_METRICS_HPP
#define SEGROBUST_METRICS_HPP

#include <string>
#include <vector>

#include "segrobust/core/types.hpp"

namespace segrobust {

// Foreground is the positive class.
struct PixelCounts {
  Index tp = 0, fp = 0, tn = 0, fn = 0;
  Index total() const { return tp + fp + tn + fn; }
  bool operator==(const PixelCounts&) const = default;
};

struct ClassMetrics {
  double pa_fg = 0, pa_bg = 0, iou_fg = 0, iou_bg = 0;
  double mpa() const { return (pa_fg + pa_bg) / 2.0; }
  double miou() const { return (iou_fg + iou_bg) / 2.0; }
};

enum class MetricFamily { PaMean, IouMean };

struct MaxOverMasks {
  double value = 0;
  std::size_t index = 0;
};

// One image under one condition, or (image_id empty, indices -1) a dataset mean.
struct EvalRecord {
  std::string image_id;
  std::string condition;
  double pa_fg = 0, pa_bg = 0, iou_fg = 0, iou_bg = 0, mpa = 0, miou = 0;
  // Mask picked by the PA-mean and IoU-mean maximization respectively.
  long pa_mask_index = -1;
  long iou_mask_index = -1;
  bool operator==(const EvalRecord&) const = default;
};

inline PixelCounts confusion(const BinaryMask& pred, const BinaryMask& truth) {
  if (!same_shape(pred, truth)) throw DimensionMismatch("confusion: mask shapes differ");
  PixelCounts c;
  c.tp = (pred && truth).count();
  c.fp = (pred && !truth).count();
  c.fn = (!pred && truth).count();
  c.tn = pred.size() - c.tp - c.fp - c.fn;
  return c;
}

// Background IoU takes background as the positive class: tn / (tn + fn + fp).
inline ClassMetrics class_metrics(const PixelCounts& c) {
  if (c.tp + c.fn == 0) throw DegenerateClass("ground truth has no foreground pixels");
  if (c.tn + c.fp == 0) throw DegenerateClass("ground truth has no background pixels");
  const auto d = [](Index v) { return static_cast<double>(v); };
  ClassMetrics m;
  m.pa_fg = d(c.tp) / d(c.tp + c.fn);
  m.pa_bg = d(c.tn) / d(c.tn + c.fp);
  m.iou_fg = d(c.tp) / d(c.tp + c.fp + c.fn);
  m.iou_bg = d(c.tn) / d(c.tn + c.fn + c.fp);
  return m;
}

inline double family_value(const ClassMetrics& m, MetricFamily family) {
  return family == MetricFamily::PaMean ? m.mpa() : m.miou();
}

// Maximum over candidate masks; ties go to the lowest index.
inline MaxOverMasks metric_max_over_masks(const std::vector<BinaryMask>& preds,
                                          const BinaryMask& truth, MetricFamily family) {
  if (preds.empty()) throw EmptyPredictionList("no predicted masks to evaluate");
  MaxOverMasks best;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double v = family_value(class_metrics(confusion(preds[i], truth)), family);
    if (i == 0 || v > best.value) best = {v, i};
  }
  return best;
}

// Per-image record: each family is maximized independently and its class
// values come from its own argmax mask.
inline EvalRecord evaluate_masks(const std::vector<BinaryMask>& preds, const BinaryMask& truth) {
  if (preds.empty()) throw EmptyPredictionList("no predicted masks to evaluate");
  std::vector<ClassMetrics> per_mask;
  per_mask.reserve(preds.size());
  for (const auto& p : preds) per_mask.push_back(class_metrics(confusion(p, truth)));
  std::size_t pa_best = 0, iou_best = 0;
  for (std::size_t i = 1; i < per_mask.size(); ++i) {
    if (per_mask[i].mpa() > per_mask[pa_best].mpa()) pa_best = i;
    if (per_mask[i].miou() > per_mask[iou_best].miou()) iou_best = i;
  }
  EvalRecord r;
  r.pa_fg = per_mask[pa_best].pa_fg;
  r.pa_bg = per_mask[pa_best].pa_bg;
  r.iou_fg = per_mask[iou_best].iou_fg;
  r.iou_bg = per_mask[iou_best].iou_bg;
  r.mpa = per_mask[pa_best].mpa();
  r.miou = per_mask[iou_best].miou();
  r.pa_mask_index = static_cast<long>(pa_best);
  r.iou_mask_index = static_cast<long>(iou_best);
  return r;
}

inline EvalRecord record_from_class_values(double pa_fg, double pa_bg, double iou_fg,
                                           double iou_bg) {
  EvalRecord r;
  r.pa_fg = pa_fg;
  r.pa_bg = pa_bg;
  r.iou_fg = iou_fg;
  r.iou_bg = iou_bg;
  r.mpa = (pa_fg + pa_bg) / 2.0;
  r.miou = (iou_fg + iou_bg) / 2.0;
  return r;
}

// Unweighted field-wise mean; the condition tag is taken from the first row.
inline EvalRecord dataset_mean(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw EmptyDataset("dataset_mean over zero records");
  EvalRecord m;
  m.condition = records.front().condition;
  for (const auto& r : records) {
    m.pa_fg += r.pa_fg;
    m.pa_bg += r.pa_bg;
    m.iou_fg += r.iou_fg;
    m.iou_bg += r.iou_bg;
    m.mpa += r.mpa;
    m.miou += r.miou;
  }
  const double n = static_cast<double>(records.size());
  m.pa_fg /= n;
  m.pa_bg /= n;
  m.iou_fg /= n;
  m.iou_bg /= n;
  m.mpa /= n;
  m.miou /= n;
  if (records.size() == 1) {
    m.image_id = records.front().image_id;
    m.pa_mask_index = records.front().pa_mask_index;
    m.iou_mask_index = records.front().iou_mask_index;
  }
  return m;
}

}  // namespace segrobust

#endif  // SEGROBUST_METRICS_HPP
