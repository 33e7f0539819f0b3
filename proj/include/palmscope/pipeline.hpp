// Subcommand drivers: each one maps a manifest through a pure per-record
// stage, then a single ordered emitter writes reports and overlays.
// Reports are byte-stable for a fixed (inputs, config, seed) triple at any
// worker count.
#pragma once

#include "palmscope/annotations.hpp"
#include "palmscope/config.hpp"
#include "palmscope/counting.hpp"
#include "palmscope/detection.hpp"
#include "palmscope/evaluation.hpp"
#include "palmscope/imageio.hpp"
#include "palmscope/manifest.hpp"
#include "palmscope/overlay.hpp"
#include "palmscope/preprocess.hpp"
#include "palmscope/severity.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace palmscope {

namespace fs = std::filesystem;
using nlohmann::json;

/// Ordered parallel map: work items run on up to `jobs` workers, results
/// land in per-index slots so aggregation order never depends on timing.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  jobs = std::max(1, jobs);
  if (jobs == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const std::size_t workers = std::min<std::size_t>(jobs, n);
  for (std::size_t t = 0; t < workers; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& th : pool) th.join();
}

namespace detail {

inline std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path.string());
  out << text;
}

inline void write_json_file(const fs::path& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

inline std::string format_double(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

inline json optional_double(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

// One processed manifest record: a report fragment plus its failures.
struct RecordOutcome {
  json entry;  // null when the record produced nothing
  std::vector<std::string> errors;
};

// Emit collected outcomes into the report skeleton; returns the exit code.
inline int finalize_report(const Manifest& manifest,
                           std::vector<RecordOutcome>& outcomes, json& report,
                           const fs::path& report_path) {
  json results = json::array();
  json errors = json::array();
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (!outcomes[i].entry.is_null()) results.push_back(outcomes[i].entry);
    for (const std::string& msg : outcomes[i].errors) {
      errors.push_back({{"image_id", manifest.records[i].image_id}, {"error", msg}});
      std::cerr << "palmscope: record-error: " << manifest.records[i].image_id
                << ": " << msg << "\n";
    }
  }
  report["results"] = std::move(results);
  report["errors"] = errors;
  write_json_file(report_path, report);
  return errors.empty() ? 0 : 1;
}

enum class AnnotationKind { ViaPolygons, BoxExport, YoloLines };

inline AnnotationKind sniff_annotation(const std::string& text) {
  const std::size_t first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) throw Error("annotation file is empty");
  if (text[first] != '{' && text[first] != '[') return AnnotationKind::YoloLines;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("annotation JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error("annotation JSON: expected an object");
  if (j.contains("images")) return AnnotationKind::BoxExport;
  return AnnotationKind::ViaPolygons;
}

// Polygons belonging to one manifest record: the VIA filename must equal
// either the record's image_id or the image file's basename.
inline std::vector<PolygonAnnotation> polygons_for_record(
    const ViaParseResult& via, const ManifestRecord& rec) {
  const std::string basename = rec.image_path.filename().string();
  std::vector<PolygonAnnotation> out;
  for (const PolygonAnnotation& poly : via.polygons)
    if (poly.image_id == rec.image_id || poly.image_id == basename)
      out.push_back(poly);
  return out;
}

inline json box_to_json(const Box& b) {
  return json::array({b.x_min, b.y_min, b.x_max, b.y_max});
}

}  // namespace detail

// ---------------------------------------------------------------------------
// ingest: normalize VIA polygon exports, box-export JSON, and normalized box
// lines into one bundle (masks as PNG, boxes as line records).

inline int run_ingest(const Config& cfg, const Manifest& manifest) {
  const fs::path out(cfg.output_dir);
  fs::create_directories(out / "masks");
  fs::create_directories(out / "labels");

  std::vector<detail::RecordOutcome> outcomes(manifest.records.size());
  parallel_for(manifest.records.size(), cfg.jobs, [&](std::size_t i) {
    const ManifestRecord& rec = manifest.records[i];
    detail::RecordOutcome& result = outcomes[i];
    if (!rec.annotation_path) return;  // nothing to ingest for this record
    try {
      const std::string text = detail::read_text_file(*rec.annotation_path);
      const ImageBuffer img = load_image(rec.image_path);
      json entry{{"image_id", rec.image_id},
                 {"width", img.width},
                 {"height", img.height}};

      switch (detail::sniff_annotation(text)) {
        case detail::AnnotationKind::ViaPolygons: {
          const ViaParseResult via = parse_via_polygons(text);
          for (const std::string& err : via.record_errors)
            result.errors.push_back("VIA: " + err);
          const auto polys = detail::polygons_for_record(via, rec);
          if (polys.empty() && !via.polygons.empty())
            result.errors.push_back("VIA document has no polygons for this image");
          json polygons = json::array();
          int mask_index = 0;
          for (const PolygonAnnotation& poly : polys) {
            const BinaryMask mask = rasterize_polygon(poly, img.width, img.height);
            const std::string mask_name =
                rec.image_id + "_mask" + std::to_string(mask_index) + ".png";
            save_mask_png(mask, out / "masks" / mask_name);
            json vertices = json::array();
            for (const auto& v : poly.vertices)
              vertices.push_back(json::array({v[0], v[1]}));
            polygons.push_back({{"class_label", poly.class_label},
                                {"vertices", vertices},
                                {"mask_pixels", mask.count_set()},
                                {"mask_path", "masks/" + mask_name}});
            ++mask_index;
          }
          entry["polygons"] = polygons;
          entry["skipped_non_polygon"] = via.skipped_non_polygon;
          break;
        }
        case detail::AnnotationKind::BoxExport: {
          const auto exported = parse_box_export(text);
          const std::string basename = rec.image_path.filename().string();
          const BoxExportImage* match = nullptr;
          for (const auto& e : exported)
            if (e.file_name == rec.image_id || e.file_name == basename) match = &e;
          if (!match)
            throw Error("box export has no entry for this image");
          if (match->width != img.width || match->height != img.height)
            throw Error("box export dimensions disagree with the image");
          std::string lines;
          for (const BoxAnnotation& box : match->boxes)
            lines += yolo_line_from_box(box, img.width, img.height) + "\n";
          const std::string label_name = rec.image_id + ".txt";
          detail::write_text_file(out / "labels" / label_name, lines);
          entry["labels_path"] = "labels/" + label_name;
          entry["boxes"] = match->boxes.size();
          break;
        }
        case detail::AnnotationKind::YoloLines: {
          const auto boxes = parse_yolo_boxes(text, img.width, img.height);
          const std::string label_name = rec.image_id + ".txt";
          detail::write_text_file(out / "labels" / label_name, text);
          entry["labels_path"] = "labels/" + label_name;
          entry["boxes"] = boxes.size();
          break;
        }
      }
      result.entry = std::move(entry);
    } catch (const Error& e) {
      result.errors.push_back(e.what());
    }
  });

  json report{{"schema_version", 1}, {"subcommand", "ingest"}};
  return detail::finalize_report(manifest, outcomes, report, out / "annotations.json");
}

// ---------------------------------------------------------------------------
// severity: rasterized leaflet masks -> crop segmentation -> progression
// percentages, with crop|quantized overlays.

inline int run_severity(const Config& cfg, const Manifest& manifest) {
  const fs::path out(cfg.output_dir);
  fs::create_directories(out / "overlays");

  std::vector<detail::RecordOutcome> outcomes(manifest.records.size());
  parallel_for(manifest.records.size(), cfg.jobs, [&](std::size_t i) {
    const ManifestRecord& rec = manifest.records[i];
    detail::RecordOutcome& result = outcomes[i];
    try {
      if (!rec.annotation_path)
        throw Error("severity needs annotation_path (VIA JSON or mask PNG)");
      const ImageBuffer img = load_image(rec.image_path);

      std::vector<BinaryMask> masks;
      if (rec.annotation_path->extension() == ".png") {
        BinaryMask mask = load_mask_png(*rec.annotation_path);
        if (mask.width != img.width || mask.height != img.height)
          throw Error("mask dimensions disagree with the image");
        masks.push_back(std::move(mask));
      } else {
        const std::string text = detail::read_text_file(*rec.annotation_path);
        const ViaParseResult via = parse_via_polygons(text);
        for (const std::string& err : via.record_errors)
          result.errors.push_back("VIA: " + err);
        for (const PolygonAnnotation& poly : detail::polygons_for_record(via, rec))
          masks.push_back(rasterize_polygon(poly, img.width, img.height));
      }
      if (masks.empty()) throw Error("no leaflet masks for this image");

      const std::vector<ImageBuffer> crops = crop_segment(img, masks);
      json leaflets = json::array();
      for (std::size_t k = 0; k < masks.size(); ++k) {
        try {
          ProgressionReport report = compute_progression(img, masks[k], cfg.scheme);
          report.mask_index = static_cast<int>(k);
          const ImageBuffer quantized = quantize_colors(img, cfg.scheme, masks[k]);
          const std::string overlay_name =
              rec.image_id + "_leaflet" + std::to_string(k) + ".png";
          save_png(hstack(crops[k], quantized), out / "overlays" / overlay_name);
          leaflets.push_back({{"mask_index", report.mask_index},
                              {"green_perc", report.green_perc},
                              {"brown_perc", report.brown_perc},
                              {"leaf_pixels", report.leaf_pixels},
                              {"overlay", "overlays/" + overlay_name}});
        } catch (const NoLeafError& e) {
          result.errors.push_back("leaflet " + std::to_string(k) + ": " + e.what());
        }
      }
      result.entry = {{"image_id", rec.image_id}, {"leaflets", std::move(leaflets)}};
    } catch (const Error& e) {
      result.errors.push_back(e.what());
    }
  });

  // Tabular mirror of the per-leaflet results.
  std::string csv = "image_id,mask_index,green_perc,brown_perc,leaf_pixels\n";
  for (const auto& outcome : outcomes) {
    if (outcome.entry.is_null()) continue;
    for (const auto& leaf : outcome.entry.at("leaflets"))
      csv += outcome.entry.at("image_id").get<std::string>() + "," +
             std::to_string(leaf.at("mask_index").get<int>()) + "," +
             std::to_string(leaf.at("green_perc").get<int>()) + "," +
             std::to_string(leaf.at("brown_perc").get<int>()) + "," +
             std::to_string(leaf.at("leaf_pixels").get<long>()) + "\n";
  }
  detail::write_text_file(out / "severity_report.csv", csv);

  json report{{"schema_version", 1}, {"subcommand", "severity"}};
  return detail::finalize_report(manifest, outcomes, report,
                                 out / "severity_report.json");
}

// ---------------------------------------------------------------------------
// count: either the classical pipeline or detection-file counting.

inline int run_count(const Config& cfg, const Manifest& manifest,
                     const std::string& method) {
  if (method != "classical" && method != "detections")
    throw Error("count: method must be classical or detections");
  const fs::path out(cfg.output_dir);
  fs::create_directories(out / "overlays");

  std::vector<detail::RecordOutcome> outcomes(manifest.records.size());
  parallel_for(manifest.records.size(), cfg.jobs, [&](std::size_t i) {
    const ManifestRecord& rec = manifest.records[i];
    detail::RecordOutcome& result = outcomes[i];
    try {
      if (method == "classical") {
        const ImageBuffer img = load_image(rec.image_path);
        const ClassicalCountResult counted =
            count_caterpillars_classical(img, cfg.count_params);

        // Bounding boxes of counted components, numbered in label order.
        ImageBuffer overlay = img;
        json components = json::array();
        std::vector<std::array<int, 4>> extents(
            counted.components.n_components, {counted.components.width, counted.components.height, -1, -1});
        for (int y = 0; y < counted.components.height; ++y)
          for (int x = 0; x < counted.components.width; ++x) {
            const int label = counted.components.at(x, y);
            if (label == 0) continue;
            auto& e = extents[label - 1];
            e[0] = std::min(e[0], x);
            e[1] = std::min(e[1], y);
            e[2] = std::max(e[2], x);
            e[3] = std::max(e[3], y);
          }
        int number = 0;
        for (int label = 1; label <= counted.components.n_components; ++label) {
          const long area = counted.components.areas[label - 1];
          if (area < cfg.count_params.min_area) continue;
          ++number;
          const auto& e = extents[label - 1];
          const Box box{static_cast<double>(e[0]), static_cast<double>(e[1]),
                        static_cast<double>(e[2] + 1), static_cast<double>(e[3] + 1)};
          draw_box_outline(overlay, box, {255, 0, 0});
          draw_number(overlay, e[0], std::max(0, e[1] - 12), number, {255, 0, 0});
          components.push_back({{"label", label},
                                {"area", area},
                                {"box", detail::box_to_json(box)}});
        }
        const std::string overlay_name = rec.image_id + "_count_classical.png";
        save_png(overlay, out / "overlays" / overlay_name);
        result.entry = {{"image_id", rec.image_id},
                        {"count", counted.count},
                        {"components", std::move(components)},
                        {"overlay", "overlays/" + overlay_name}};
      } else {
        if (!rec.detection_path) throw Error("count --method detections needs detection_path");
        const DetectionFile file =
            parse_detection_file(detail::read_text_file(*rec.detection_path));
        const double conf_cut = file.conf_cut.value_or(cfg.conf_cut);
        const auto kept = nms(file.detections, cfg.nms_iou);

        std::map<int, long> per_class;
        std::vector<Detection> survivors;
        for (const Detection& d : kept)
          if (d.confidence >= conf_cut) {
            ++per_class[d.class_id];
            survivors.push_back(d);
          }
        const long count = per_class.count(cfg.caterpillar_class_id)
                               ? per_class[cfg.caterpillar_class_id]
                               : 0;

        ImageBuffer overlay = load_image(rec.image_path);
        int number = 0;
        for (const Detection& d : survivors) {
          const bool target = d.class_id == cfg.caterpillar_class_id;
          const Rgb color = target ? Rgb{255, 0, 0} : Rgb{90, 90, 90};
          draw_box_outline(overlay, d.box, color);
          if (target)
            draw_number(overlay, static_cast<int>(d.box.x_min),
                        std::max(0, static_cast<int>(d.box.y_min) - 12), ++number,
                        color);
        }
        const std::string overlay_name = rec.image_id + "_count_detections.png";
        save_png(overlay, out / "overlays" / overlay_name);

        json per_class_json = json::object();
        for (const auto& [cls, n] : per_class)
          per_class_json[std::to_string(cls)] = n;
        result.entry = {{"image_id", rec.image_id},
                        {"count", count},
                        {"conf_cut", conf_cut},
                        {"per_class", std::move(per_class_json)},
                        {"overlay", "overlays/" + overlay_name}};
      }
    } catch (const Error& e) {
      result.errors.push_back(e.what());
    }
  });

  std::string csv = "image_id,method,count\n";
  for (const auto& outcome : outcomes)
    if (!outcome.entry.is_null())
      csv += outcome.entry.at("image_id").get<std::string>() + "," + method + "," +
             std::to_string(outcome.entry.at("count").get<long>()) + "\n";
  detail::write_text_file(out / ("count_report_" + method + ".csv"), csv);

  json report{{"schema_version", 1}, {"subcommand", "count"}, {"method", method}};
  return detail::finalize_report(manifest, outcomes, report,
                                 out / ("count_report_" + method + ".json"));
}

// ---------------------------------------------------------------------------
// eval: the metric stack over ground-truth boxes and detection files.

inline int run_eval(const Config& cfg, const Manifest& manifest) {
  const fs::path out(cfg.output_dir);
  fs::create_directories(out);

  struct Loaded {
    std::vector<BoxAnnotation> truth;
    std::vector<Detection> detections;
    std::optional<double> file_conf_cut;
    bool ok = false;
  };
  std::vector<Loaded> loaded(manifest.records.size());
  std::vector<detail::RecordOutcome> outcomes(manifest.records.size());

  parallel_for(manifest.records.size(), cfg.jobs, [&](std::size_t i) {
    const ManifestRecord& rec = manifest.records[i];
    try {
      if (!rec.annotation_path) throw Error("eval needs annotation_path (box lines)");
      if (!rec.detection_path) throw Error("eval needs detection_path");
      const ImageBuffer img = load_image(rec.image_path);
      loaded[i].truth = parse_yolo_boxes(detail::read_text_file(*rec.annotation_path),
                                         img.width, img.height);
      DetectionFile file =
          parse_detection_file(detail::read_text_file(*rec.detection_path));
      loaded[i].detections = std::move(file.detections);
      loaded[i].file_conf_cut = file.conf_cut;
      loaded[i].ok = true;
      outcomes[i].entry = {{"image_id", rec.image_id},
                           {"truth_boxes", loaded[i].truth.size()},
                           {"detections", loaded[i].detections.size()}};
    } catch (const Error& e) {
      outcomes[i].errors.push_back(e.what());
    }
  });

  // Metric pools over the records that loaded; single sequential reduction.
  std::vector<std::vector<Detection>> dets_pool;
  std::vector<std::vector<BoxAnnotation>> truth_pool;
  std::vector<std::size_t> pooled_records;
  for (std::size_t i = 0; i < loaded.size(); ++i)
    if (loaded[i].ok) {
      dets_pool.push_back(loaded[i].detections);
      truth_pool.push_back(loaded[i].truth);
      pooled_records.push_back(i);
    }

  std::set<int> classes;
  for (const auto& v : truth_pool)
    for (const auto& t : v) classes.insert(t.class_id);
  for (const auto& v : dets_pool)
    for (const auto& d : v) classes.insert(d.class_id);

  json per_class_json = json::object();
  std::vector<std::optional<double>> aps;
  std::vector<int> class_order(classes.begin(), classes.end());
  std::string csv = "class,tp,fp,fn,accuracy,precision,recall,f1,ap\n";

  for (int cls : class_order) {
    const ApResult ap = average_precision(dets_pool, truth_pool, cls, cfg.iou_cut);
    aps.push_back(ap.ap);

    // Operating point: detections at conf >= conf_cut, consumed as given.
    ConfusionCounts counts;
    for (std::size_t i = 0; i < dets_pool.size(); ++i) {
      std::vector<Detection> strong;
      for (const Detection& d : dets_pool[i])
        if (d.class_id == cls && d.confidence >= cfg.conf_cut) strong.push_back(d);
      std::vector<BoxAnnotation> truths;
      for (const BoxAnnotation& t : truth_pool[i])
        if (t.class_id == cls) truths.push_back(t);
      const RoiPartition p = filter_rois(strong, truths, cfg.iou_cut);
      counts.tp += static_cast<long>(p.true_positives.size());
      counts.fp += static_cast<long>(p.false_positives.size());
      counts.fn += static_cast<long>(p.unmatched_truth.size());
    }

    json entry{{"tp", counts.tp}, {"fp", counts.fp},
               {"fn", counts.fn}, {"tn", counts.tn},
               {"truth_count", ap.truth_count},
               {"ap", detail::optional_double(ap.ap)}};
    std::string acc = "undefined", prec = "undefined", rec = "undefined",
                f1 = "undefined";
    if (counts.total() > 0) {
      const ClassificationMetrics m = classification_metrics(counts);
      entry["accuracy"] = detail::optional_double(m.accuracy);
      entry["precision"] = detail::optional_double(m.precision);
      entry["recall"] = detail::optional_double(m.recall);
      entry["f1"] = detail::optional_double(m.f1);
      if (m.accuracy) acc = detail::format_double(*m.accuracy, 6);
      if (m.precision) prec = detail::format_double(*m.precision, 6);
      if (m.recall) rec = detail::format_double(*m.recall, 6);
      if (m.f1) f1 = detail::format_double(*m.f1, 6);
    } else {
      entry["accuracy"] = nullptr;
      entry["precision"] = nullptr;
      entry["recall"] = nullptr;
      entry["f1"] = nullptr;
    }
    per_class_json[std::to_string(cls)] = entry;
    csv += std::to_string(cls) + "," + std::to_string(counts.tp) + "," +
           std::to_string(counts.fp) + "," + std::to_string(counts.fn) + "," +
           acc + "," + prec + "," + rec + "," + f1 + "," +
           (ap.ap ? detail::format_double(*ap.ap, 6) : "undefined") + "\n";

    // Plot-ready curve, two columns.
    std::string pr = "recall,precision\n";
    for (const PrPoint& point : ap.curve.points)
      pr += detail::format_double(point.recall, 6) + "," +
            detail::format_double(point.precision, 6) + "\n";
    detail::write_text_file(out / ("pr_class_" + std::to_string(cls) + ".csv"), pr);
  }

  json map_json = nullptr;
  json excluded = json::array();
  if (!aps.empty()) {
    try {
      const MapResult map = mean_average_precision(aps);
      map_json = map.value;
      for (std::size_t idx : map.excluded) excluded.push_back(class_order[idx]);
      csv += "mAP,,,,,,,," + detail::format_double(map.value, 6) + "\n";
    } catch (const Error&) {
      for (int cls : class_order) excluded.push_back(cls);
      csv += "mAP,,,,,,,,undefined\n";
    }
  }

  // Count agreement at the configured cut, when every pooled record carries
  // a truth count. Counting here matches `count --method detections`.
  json agreement_json = nullptr;
  bool all_counts = !pooled_records.empty();
  for (std::size_t idx : pooled_records)
    if (!manifest.records[idx].truth_count) all_counts = false;
  if (all_counts) {
    std::vector<long> predicted, truth_counts;
    for (std::size_t k = 0; k < pooled_records.size(); ++k) {
      const double cut =
          loaded[pooled_records[k]].file_conf_cut.value_or(cfg.conf_cut);
      predicted.push_back(count_caterpillars_detections(
          dets_pool[k], cfg.caterpillar_class_id, cut, cfg.nms_iou));
      truth_counts.push_back(*manifest.records[pooled_records[k]].truth_count);
    }
    const CountAgreement agreement = count_agreement(predicted, truth_counts);
    json deltas = json::array();
    for (std::size_t k = 0; k < pooled_records.size(); ++k)
      deltas.push_back({{"image_id", manifest.records[pooled_records[k]].image_id},
                        {"predicted", predicted[k]},
                        {"truth", truth_counts[k]},
                        {"delta", agreement.deltas[k]}});
    agreement_json = {{"agreement_percent", agreement.rate * 100.0},
                      {"exact_matches", agreement.exact_matches},
                      {"images", pooled_records.size()},
                      {"deltas", std::move(deltas)}};
  }

  detail::write_text_file(out / "eval_report.csv", csv);
  json report{{"schema_version", 1},
              {"subcommand", "eval"},
              {"iou_cut", cfg.iou_cut},
              {"conf_cut", cfg.conf_cut},
              {"per_class", per_class_json},
              {"map", map_json},
              {"map_excluded_classes", excluded},
              {"count_agreement", agreement_json}};
  return detail::finalize_report(manifest, outcomes, report, out / "eval_report.json");
}

// ---------------------------------------------------------------------------
// compare: the count-agreement harness across methods.

namespace detail {

struct CountSource {
  std::string method;
  std::vector<std::string> image_ids;
  std::vector<long> predicted;
  std::vector<long> truth;
};

inline CountSource load_pairs_csv(const fs::path& path) {
  CountSource src;
  src.method = path.stem().string();
  std::istringstream stream(read_text_file(path));
  std::string line;
  int line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    std::stringstream fields(line);
    std::string id, pred, truth;
    if (!std::getline(fields, id, ',') || !std::getline(fields, pred, ',') ||
        !std::getline(fields, truth))
      throw Error("pairs line " + std::to_string(line_no) +
                  ": expected image_id,predicted,truth");
    if (line_no == 1 && (pred.find_first_not_of("0123456789- \t\r") != std::string::npos))
      continue;  // header row
    try {
      src.predicted.push_back(std::stol(pred));
      src.truth.push_back(std::stol(truth));
    } catch (const std::exception&) {
      throw Error("pairs line " + std::to_string(line_no) + ": counts must be integers");
    }
    src.image_ids.push_back(id);
  }
  if (src.predicted.empty()) throw Error("pairs file has no data rows");
  return src;
}

inline CountSource load_count_report(const fs::path& path, const Manifest& manifest) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw Error("count report " + path.string() + ": " + e.what());
  }
  CountSource src;
  src.method = j.value("method", path.stem().string());
  std::map<std::string, long> by_id;
  for (const auto& entry : j.value("results", json::array()))
    by_id[entry.at("image_id").get<std::string>()] = entry.at("count").get<long>();
  for (const ManifestRecord& rec : manifest.records) {
    const auto it = by_id.find(rec.image_id);
    if (it == by_id.end())
      throw Error("count report " + path.string() + " is missing image \"" +
                  rec.image_id + "\"");
    if (!rec.truth_count)
      throw Error("manifest record \"" + rec.image_id + "\" has no truth_count");
    src.image_ids.push_back(rec.image_id);
    src.predicted.push_back(it->second);
    src.truth.push_back(*rec.truth_count);
  }
  if (src.predicted.empty()) throw Error("count report matched no manifest records");
  return src;
}

}  // namespace detail

inline int run_compare(const Config& cfg, const std::optional<Manifest>& manifest,
                       const std::optional<fs::path>& pairs_path,
                       const std::vector<fs::path>& count_reports) {
  const fs::path out(cfg.output_dir);
  fs::create_directories(out);

  std::vector<detail::CountSource> sources;
  if (pairs_path) sources.push_back(detail::load_pairs_csv(*pairs_path));
  for (const fs::path& report : count_reports) {
    if (!manifest)
      throw Error("compare --counts needs --manifest for truth counts");
    sources.push_back(detail::load_count_report(report, *manifest));
  }
  if (sources.empty())
    throw Error("compare needs --pairs and/or --counts inputs");

  json methods = json::array();
  std::string csv = "method,images,exact_matches,agreement_percent\n";
  for (const detail::CountSource& src : sources) {
    const CountAgreement agreement = count_agreement(src.predicted, src.truth);
    json deltas = json::array();
    for (std::size_t i = 0; i < src.image_ids.size(); ++i)
      deltas.push_back({{"image_id", src.image_ids[i]},
                        {"predicted", src.predicted[i]},
                        {"truth", src.truth[i]},
                        {"delta", agreement.deltas[i]}});
    const double percent = agreement.rate * 100.0;
    methods.push_back({{"method", src.method},
                       {"images", src.image_ids.size()},
                       {"exact_matches", agreement.exact_matches},
                       {"agreement_percent", percent},
                       {"deltas", std::move(deltas)}});
    csv += src.method + "," + std::to_string(src.image_ids.size()) + "," +
           std::to_string(agreement.exact_matches) + "," +
           detail::format_double(percent, 1) + "\n";
    std::cout << "compare: " << src.method << " agreement "
              << detail::format_double(percent, 1) << "% ("
              << agreement.exact_matches << "/" << src.image_ids.size() << ")\n";
  }

  detail::write_text_file(out / "agreement.csv", csv);
  detail::write_json_file(out / "agreement.json",
                          json{{"schema_version", 1},
                               {"subcommand", "compare"},
                               {"methods", methods}});
  return 0;
}

// ---------------------------------------------------------------------------
// augment: a seeded sweep of the affine augmentation family.

inline int run_augment(const Config& cfg, const Manifest& manifest) {
  const fs::path out(cfg.output_dir);
  fs::create_directories(out / "augmented");

  std::vector<detail::RecordOutcome> outcomes(manifest.records.size());
  parallel_for(manifest.records.size(), cfg.jobs, [&](std::size_t i) {
    const ManifestRecord& rec = manifest.records[i];
    detail::RecordOutcome& result = outcomes[i];
    try {
      ImageBuffer img = load_image(rec.image_path);
      if (cfg.augment.resize_to)
        img = resize_image(img, (*cfg.augment.resize_to)[0],
                           (*cfg.augment.resize_to)[1]);

      json variants = json::array();
      for (int v = 0; v < cfg.augment.variants_per_image; ++v) {
        // Per-(seed, record, variant) stream: independent of worker count.
        std::mt19937_64 rng(cfg.seed ^ (0x9E3779B97F4A7C15ULL * (i + 1)) ^
                            (0xBF58476D1CE4E5B9ULL * (v + 1)));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        auto in_range = [&](const std::array<double, 2>& r) {
          return r[0] + (r[1] - r[0]) * unit(rng);
        };
        const bool flip_h = unit(rng) < cfg.augment.flip_h_prob;
        const bool flip_v = unit(rng) < cfg.augment.flip_v_prob;
        const double rotate = in_range(cfg.augment.rotate_range_deg);
        const double shear_h = in_range(cfg.augment.shear_h_range);
        const double shear_v = in_range(cfg.augment.shear_v_range);
        const double zoom = in_range(cfg.augment.zoom_range);

        AugmentSpec spec;
        json ops = json::array();
        if (flip_h) {
          spec.push_back(AugmentOp::flip_h());
          ops.push_back({{"op", "flip_h"}});
        }
        if (flip_v) {
          spec.push_back(AugmentOp::flip_v());
          ops.push_back({{"op", "flip_v"}});
        }
        spec.push_back(AugmentOp::rotate(rotate));
        ops.push_back({{"op", "rotate"}, {"value", rotate}});
        spec.push_back(AugmentOp::shear_h(shear_h));
        ops.push_back({{"op", "shear_h"}, {"value", shear_h}});
        spec.push_back(AugmentOp::shear_v(shear_v));
        ops.push_back({{"op", "shear_v"}, {"value", shear_v}});
        spec.push_back(AugmentOp::zoom(zoom));
        ops.push_back({{"op", "zoom"}, {"value", zoom}});

        const ImageBuffer augmented = augment_image(img, spec);
        const std::string name = rec.image_id + "_aug" + std::to_string(v) + ".png";
        save_png(augmented, out / "augmented" / name);
        variants.push_back({{"output", "augmented/" + name}, {"ops", std::move(ops)}});
      }
      result.entry = {{"image_id", rec.image_id}, {"variants", std::move(variants)}};
    } catch (const Error& e) {
      result.errors.push_back(e.what());
    }
  });

  json report{{"schema_version", 1}, {"subcommand", "augment"}, {"seed", cfg.seed}};
  return detail::finalize_report(manifest, outcomes, report,
                                 out / "augment_report.json");
}

}  // namespace palmscope
