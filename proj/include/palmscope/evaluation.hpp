// Metric stack: confusion-count metrics, all-point average precision from
// confidence-ranked detections, class-mean AP, and count agreement.
// Undefined metrics stay undefined; they are never coerced to zero.
#pragma once

#include "palmscope/detection.hpp"

#include <map>
#include <optional>
#include <vector>

namespace palmscope {

struct ConfusionCounts {
  long tp = 0, fp = 0, tn = 0, fn = 0;

  long total() const { return tp + fp + tn + fn; }
};

struct ClassificationMetrics {
  std::optional<double> accuracy;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
};

/// Accuracy, precision, recall and F1 from raw counts. Any metric whose
/// denominator is zero is reported as undefined.
inline ClassificationMetrics classification_metrics(const ConfusionCounts& c) {
  if (c.tp < 0 || c.fp < 0 || c.tn < 0 || c.fn < 0)
    throw Error("classification_metrics: counts must be non-negative");
  if (c.total() == 0)
    throw Error("classification_metrics: all counts are zero");

  ClassificationMetrics m;
  m.accuracy = static_cast<double>(c.tp + c.tn) / c.total();
  if (c.tp + c.fp > 0) m.precision = static_cast<double>(c.tp) / (c.tp + c.fp);
  if (c.tp + c.fn > 0) m.recall = static_cast<double>(c.tp) / (c.tp + c.fn);
  if (m.precision && m.recall && (*m.precision + *m.recall) > 0.0)
    m.f1 = 2.0 * (*m.precision) * (*m.recall) / (*m.precision + *m.recall);
  return m;
}

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
  double confidence = 0.0;
};

/// Points in detection-rank order; recall is non-decreasing along the curve.
struct PrCurve {
  std::vector<PrPoint> points;
};

struct ApResult {
  PrCurve curve;
  std::optional<double> ap;  // undefined when the class has no ground truth
  long truth_count = 0;
};

/// Pool one class's detections across images, rank by confidence (ties by
/// image order then input order), mark TP/FP by greedy unmatched-truth
/// matching at iou_cut, and integrate precision over every recall increase.
inline ApResult average_precision(
    const std::vector<std::vector<Detection>>& detections_per_image,
    const std::vector<std::vector<BoxAnnotation>>& truth_per_image,
    int class_id, double iou_cut) {
  if (detections_per_image.size() != truth_per_image.size())
    throw Error("average_precision: detections/truth image counts differ");
  if (iou_cut < 0.0 || iou_cut > 1.0)
    throw Error("average_precision: iou_cut must be in [0,1]");

  ApResult result;
  for (const auto& truths : truth_per_image)
    for (const auto& t : truths)
      if (t.class_id == class_id) ++result.truth_count;
  if (result.truth_count == 0) return result;  // AP undefined

  struct Ranked {
    std::size_t image;
    std::size_t index;
    double confidence;
  };
  std::vector<Ranked> ranked;
  for (std::size_t img = 0; img < detections_per_image.size(); ++img)
    for (std::size_t i = 0; i < detections_per_image[img].size(); ++i)
      if (detections_per_image[img][i].class_id == class_id)
        ranked.push_back({img, i, detections_per_image[img][i].confidence});
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked& a, const Ranked& b) {
                     return a.confidence > b.confidence;
                   });

  std::vector<std::vector<bool>> matched(truth_per_image.size());
  for (std::size_t img = 0; img < truth_per_image.size(); ++img)
    matched[img].assign(truth_per_image[img].size(), false);

  long tp = 0, fp = 0;
  double ap = 0.0;
  double prev_recall = 0.0;
  for (const Ranked& r : ranked) {
    const Detection& det = detections_per_image[r.image][r.index];
    const auto& truths = truth_per_image[r.image];
    double best_iou = -1.0;
    std::size_t best_t = truths.size();
    for (std::size_t t = 0; t < truths.size(); ++t) {
      if (matched[r.image][t] || truths[t].class_id != class_id) continue;
      const double overlap = iou(det.box, truths[t].box);
      if (overlap > best_iou) {
        best_iou = overlap;
        best_t = t;
      }
    }
    if (best_t < truths.size() && best_iou >= iou_cut) {
      matched[r.image][best_t] = true;
      ++tp;
    } else {
      ++fp;
    }
    const double precision = static_cast<double>(tp) / (tp + fp);
    const double recall = static_cast<double>(tp) / result.truth_count;
    result.curve.points.push_back({recall, precision, det.confidence});
    if (recall > prev_recall) {
      ap += precision * (recall - prev_recall);
      prev_recall = recall;
    }
  }
  result.ap = ap;
  return result;
}

struct MapResult {
  double value = 0.0;
  std::vector<std::size_t> excluded;  // indices of undefined per-class APs
};

/// Arithmetic mean over the defined APs; undefined classes are excluded and
/// reported. All-undefined input is an error.
inline MapResult mean_average_precision(
    const std::vector<std::optional<double>>& per_class_ap) {
  MapResult result;
  double sum = 0.0;
  long defined = 0;
  for (std::size_t i = 0; i < per_class_ap.size(); ++i) {
    if (per_class_ap[i]) {
      sum += *per_class_ap[i];
      ++defined;
    } else {
      result.excluded.push_back(i);
    }
  }
  if (defined == 0)
    throw Error("mean_average_precision: no class has a defined AP");
  result.value = sum / defined;
  return result;
}

struct CountAgreement {
  double rate = 0.0;  // fraction of images with an exact count match
  long exact_matches = 0;
  std::vector<long> deltas;  // predicted - truth, per image
};

inline CountAgreement count_agreement(const std::vector<long>& predicted,
                                      const std::vector<long>& truth) {
  if (predicted.size() != truth.size())
    throw Error("count_agreement: list lengths differ");
  if (predicted.empty()) throw Error("count_agreement: empty input");
  CountAgreement result;
  result.deltas.reserve(predicted.size());
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    result.deltas.push_back(predicted[i] - truth[i]);
    if (predicted[i] == truth[i]) ++result.exact_matches;
  }
  result.rate = static_cast<double>(result.exact_matches) / predicted.size();
  return result;
}

/// Per-class evaluation entry of the final report.
struct ClassEval {
  ConfusionCounts counts;
  ClassificationMetrics metrics;
  std::optional<double> ap;
};

struct EvalReport {
  std::map<int, ClassEval> per_class;
  std::optional<double> map_value;
  std::vector<int> map_excluded_classes;
  std::optional<CountAgreement> agreement;
};

}  // namespace palmscope
