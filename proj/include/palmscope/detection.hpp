// Detection post-processing: greedy per-class non-maximum suppression,
// confidence-ordered ground-truth matching, and detection-based counting.
#pragma once

#include "palmscope/annotations.hpp"
#include "palmscope/geometry.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <vector>

namespace palmscope {

struct Detection {
  Box box;
  int class_id = 0;
  double confidence = 0.0;

  void validate() const {
    if (!box.valid()) throw Error("Detection: degenerate box");
    if (confidence < 0.0 || confidence > 1.0)
      throw Error("Detection: confidence must be in [0,1]");
  }
  bool operator==(const Detection&) const = default;
};

namespace detail {

// Confidence descending, input index ascending on ties.
inline std::vector<std::size_t> by_confidence(const std::vector<Detection>& dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].confidence > dets[b].confidence;
  });
  return order;
}

}  // namespace detail

/// Greedy per-class suppression: repeatedly keep the highest-confidence
/// remaining detection (ties to the lowest input index) and discard
/// same-class detections overlapping it with IoU strictly above the
/// threshold. Output is sorted by confidence descending.
inline std::vector<Detection> nms(const std::vector<Detection>& dets,
                                  double iou_threshold) {
  if (iou_threshold < 0.0 || iou_threshold > 1.0)
    throw Error("nms: iou_threshold must be in [0,1]");
  const std::vector<std::size_t> order = detail::by_confidence(dets);
  std::vector<bool> suppressed(dets.size(), false);
  std::vector<Detection> kept;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (suppressed[order[i]]) continue;
    const Detection& keep = dets[order[i]];
    kept.push_back(keep);
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      if (suppressed[order[j]]) continue;
      const Detection& other = dets[order[j]];
      if (other.class_id == keep.class_id &&
          iou(other.box, keep.box) > iou_threshold)
        suppressed[order[j]] = true;
    }
  }
  return kept;
}

/// TP/FP/FN split of one image's detections against its ground truth.
struct RoiPartition {
  std::vector<Detection> true_positives;
  std::vector<Detection> false_positives;
  std::vector<BoxAnnotation> unmatched_truth;  // false negatives
};

/// Greedy confidence-ordered matching: each detection claims the unmatched
/// same-class truth box of maximal IoU, provided IoU >= iou_cut; every truth
/// box is matched at most once.
inline RoiPartition filter_rois(const std::vector<Detection>& dets,
                                const std::vector<BoxAnnotation>& truth,
                                double iou_cut) {
  if (iou_cut < 0.0 || iou_cut > 1.0)
    throw Error("filter_rois: iou_cut must be in [0,1]");
  RoiPartition result;
  std::vector<bool> matched(truth.size(), false);
  for (std::size_t i : detail::by_confidence(dets)) {
    const Detection& det = dets[i];
    double best_iou = -1.0;
    std::size_t best_t = truth.size();
    for (std::size_t t = 0; t < truth.size(); ++t) {
      if (matched[t] || truth[t].class_id != det.class_id) continue;
      const double overlap = iou(det.box, truth[t].box);
      if (overlap > best_iou) {  // strict: IoU ties keep the lowest index
        best_iou = overlap;
        best_t = t;
      }
    }
    if (best_t < truth.size() && best_iou >= iou_cut) {
      matched[best_t] = true;
      result.true_positives.push_back(det);
    } else {
      result.false_positives.push_back(det);
    }
  }
  for (std::size_t t = 0; t < truth.size(); ++t)
    if (!matched[t]) result.unmatched_truth.push_back(truth[t]);
  return result;
}

/// Count the detections of one class that survive suppression and the
/// confidence cut.
inline long count_caterpillars_detections(const std::vector<Detection>& dets,
                                          int class_id, double conf_cut,
                                          double nms_iou = 0.5) {
  if (conf_cut < 0.0 || conf_cut > 1.0)
    throw Error("count_caterpillars_detections: conf_cut must be in [0,1]");
  long count = 0;
  for (const Detection& det : nms(dets, nms_iou))
    if (det.class_id == class_id && det.confidence >= conf_cut) ++count;
  return count;
}

/// Parse a line-oriented detection file: "class confidence x_min y_min
/// x_max y_max" per line, absolute pixel corners. Blank lines and comment
/// lines starting with '#' are ignored.
inline std::vector<Detection> parse_detections(const std::string& text) {
  std::vector<Detection> out;
  std::istringstream stream(text);
  std::string line;
  int line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    const std::size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (line[first] == '#') continue;
    std::istringstream fields(line);
    Detection det;
    if (!(fields >> det.class_id >> det.confidence >> det.box.x_min >>
          det.box.y_min >> det.box.x_max >> det.box.y_max))
      throw Error("line " + std::to_string(line_no) +
                  ": expected \"class confidence x_min y_min x_max y_max\"");
    std::string extra;
    if (fields >> extra)
      throw Error("line " + std::to_string(line_no) + ": trailing fields");
    if (det.class_id < 0)
      throw Error("line " + std::to_string(line_no) + ": class must be >= 0");
    try {
      det.validate();
    } catch (const Error& e) {
      throw Error("line " + std::to_string(line_no) + ": " + e.what());
    }
    out.push_back(det);
  }
  return out;
}

/// A detection file plus the optional per-file confidence cut it declares
/// via a "# conf_cut <value>" comment directive.
struct DetectionFile {
  std::vector<Detection> detections;
  std::optional<double> conf_cut;
};

inline DetectionFile parse_detection_file(const std::string& text) {
  DetectionFile out;
  out.detections = parse_detections(text);
  std::istringstream stream(text);
  std::string line;
  int line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    const std::size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] != '#') continue;
    std::istringstream fields(line.substr(first + 1));
    std::string key;
    if (!(fields >> key)) continue;
    if (key == "conf_cut") {
      double value;
      if (!(fields >> value) || value < 0.0 || value > 1.0)
        throw Error("line " + std::to_string(line_no) +
                    ": conf_cut directive needs a value in [0,1]");
      out.conf_cut = value;
    }
  }
  return out;
}

}  // namespace palmscope
