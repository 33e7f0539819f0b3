// Annotation ingestion: VIA 2.x polygon exports, line-oriented normalized
// box records, the box-export JSON subset, and polygon rasterization.
#pragma once

#include "palmscope/geometry.hpp"
#include "palmscope/image.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace palmscope {

struct PolygonAnnotation {
  std::string image_id;
  std::string class_label;
  std::vector<std::array<double, 2>> vertices;  // (x, y), sub-pixel
};

struct BoxAnnotation {
  int class_id = 0;
  Box box;
};

/// Outcome of parsing one VIA document. Regions that violate the polygon
/// contract are reported in record_errors and skipped; parsing continues.
struct ViaParseResult {
  std::vector<PolygonAnnotation> polygons;
  int skipped_non_polygon = 0;         // rect/circle/... regions
  std::vector<std::string> record_errors;
};

namespace detail {

inline bool finite_non_negative(double v) { return std::isfinite(v) && v >= 0.0; }

}  // namespace detail

/// Parse a VIA 2.x export. Accepts both the bare image-metadata map and the
/// full project save (which nests it under "_via_img_metadata"). Only the
/// subset filename / regions[].shape_attributes{name, all_points_x,
/// all_points_y} / regions[].region_attributes.label is consumed.
inline ViaParseResult parse_via_polygons(const std::string& document) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(document);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("VIA parse: invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw Error("VIA parse: top level must be an object");

  const nlohmann::json* metadata = &root;
  if (root.contains("_via_img_metadata")) {
    metadata = &root.at("_via_img_metadata");
    if (!metadata->is_object())
      throw Error("VIA parse: _via_img_metadata must be an object");
  }

  ViaParseResult result;
  for (auto it = metadata->begin(); it != metadata->end(); ++it) {
    const std::string& key = it.key();
    if (!key.empty() && key[0] == '_') continue;  // project settings entries
    const nlohmann::json& record = it.value();
    if (!record.is_object() || !record.contains("filename")) {
      result.record_errors.push_back("$." + key + ": missing filename");
      continue;
    }
    const std::string filename = record.at("filename").get<std::string>();
    if (!record.contains("regions")) continue;
    const nlohmann::json& regions = record.at("regions");
    if (!regions.is_array()) {
      result.record_errors.push_back("$." + key + ".regions: not an array");
      continue;
    }
    for (std::size_t i = 0; i < regions.size(); ++i) {
      const std::string path =
          "$." + key + ".regions[" + std::to_string(i) + "]";
      const nlohmann::json& region = regions[i];
      if (!region.is_object() || !region.contains("shape_attributes")) {
        result.record_errors.push_back(path + ": missing shape_attributes");
        continue;
      }
      const nlohmann::json& shape = region.at("shape_attributes");
      const std::string name = shape.value("name", "");
      if (name != "polygon") {
        ++result.skipped_non_polygon;
        continue;
      }
      if (!shape.contains("all_points_x") || !shape.contains("all_points_y")) {
        result.record_errors.push_back(path + ": polygon without point arrays");
        continue;
      }
      const nlohmann::json& xs = shape.at("all_points_x");
      const nlohmann::json& ys = shape.at("all_points_y");
      if (!xs.is_array() || !ys.is_array() || xs.size() != ys.size()) {
        result.record_errors.push_back(path + ": point arrays malformed");
        continue;
      }
      if (xs.size() < 3) {
        result.record_errors.push_back(path + ": polygon needs >= 3 points");
        continue;
      }
      PolygonAnnotation poly;
      poly.image_id = filename;
      if (region.contains("region_attributes") &&
          region.at("region_attributes").is_object())
        poly.class_label = region.at("region_attributes").value("label", "");
      bool ok = true;
      for (std::size_t p = 0; p < xs.size(); ++p) {
        if (!xs[p].is_number() || !ys[p].is_number()) {
          ok = false;
          break;
        }
        const double x = xs[p].get<double>();
        const double y = ys[p].get<double>();
        if (!detail::finite_non_negative(x) || !detail::finite_non_negative(y)) {
          ok = false;
          break;
        }
        poly.vertices.push_back({x, y});
      }
      if (!ok) {
        result.record_errors.push_back(path + ": non-numeric or negative point");
        continue;
      }
      result.polygons.push_back(std::move(poly));
    }
  }
  return result;
}

/// Parse line-oriented normalized box records: "class cx cy w h" with all
/// fractional fields in [0,1]. Corners are scaled to absolute pixels and
/// clamped to the image bounds. Blank lines are ignored.
inline std::vector<BoxAnnotation> parse_yolo_boxes(const std::string& text,
                                                   int image_width,
                                                   int image_height) {
  if (image_width < 1 || image_height < 1)
    throw Error("parse_yolo_boxes: image dimensions must be >= 1");
  std::vector<BoxAnnotation> out;
  std::istringstream stream(text);
  std::string line;
  int line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    long cls;
    double cx, cy, w, h;
    if (!(fields >> cls >> cx >> cy >> w >> h))
      throw Error("line " + std::to_string(line_no) +
                  ": expected \"class cx cy w h\"");
    std::string extra;
    if (fields >> extra)
      throw Error("line " + std::to_string(line_no) + ": trailing fields");
    if (cls < 0)
      throw Error("line " + std::to_string(line_no) + ": class must be >= 0");
    for (double v : {cx, cy, w, h})
      if (!std::isfinite(v) || v < 0.0 || v > 1.0)
        throw Error("line " + std::to_string(line_no) +
                    ": fields must lie in [0,1]");
    BoxAnnotation ann;
    ann.class_id = static_cast<int>(cls);
    ann.box.x_min = std::max(0.0, (cx - w / 2.0) * image_width);
    ann.box.y_min = std::max(0.0, (cy - h / 2.0) * image_height);
    ann.box.x_max = std::min<double>(image_width, (cx + w / 2.0) * image_width);
    ann.box.y_max =
        std::min<double>(image_height, (cy + h / 2.0) * image_height);
    if (!ann.box.valid())
      throw Error("line " + std::to_string(line_no) + ": degenerate box");
    out.push_back(ann);
  }
  return out;
}

/// Inverse of parse_yolo_boxes for one box: normalized "class cx cy w h".
inline std::string yolo_line_from_box(const BoxAnnotation& ann, int image_width,
                                      int image_height) {
  const double cx = (ann.box.x_min + ann.box.x_max) / 2.0 / image_width;
  const double cy = (ann.box.y_min + ann.box.y_max) / 2.0 / image_height;
  const double w = ann.box.width() / image_width;
  const double h = ann.box.height() / image_height;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%d %.9f %.9f %.9f %.9f", ann.class_id, cx,
                cy, w, h);
  return buf;
}

/// One image entry of the box-export JSON subset accepted by the converter.
struct BoxExportImage {
  std::string file_name;
  int width = 0;
  int height = 0;
  std::vector<BoxAnnotation> boxes;
};

/// Parse the single-document box export. Accepted subset:
///   {"images": [{"file_name", "width", "height",
///                "boxes": [{"class_id", "x_min", "y_min", "x_max", "y_max"}]}]}
inline std::vector<BoxExportImage> parse_box_export(const std::string& document) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(document);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("box export: invalid JSON: ") + e.what());
  }
  if (!root.is_object() || !root.contains("images") ||
      !root.at("images").is_array())
    throw Error("box export: expected top-level object with images array");
  std::vector<BoxExportImage> out;
  const auto& images = root.at("images");
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string path = "$.images[" + std::to_string(i) + "]";
    const auto& rec = images[i];
    if (!rec.is_object() || !rec.contains("file_name") ||
        !rec.contains("width") || !rec.contains("height"))
      throw Error("box export: " + path + ": missing file_name/width/height");
    BoxExportImage img;
    img.file_name = rec.at("file_name").get<std::string>();
    img.width = rec.at("width").get<int>();
    img.height = rec.at("height").get<int>();
    if (img.width < 1 || img.height < 1)
      throw Error("box export: " + path + ": dimensions must be >= 1");
    for (const auto& b : rec.value("boxes", nlohmann::json::array())) {
      BoxAnnotation ann;
      ann.class_id = b.at("class_id").get<int>();
      ann.box.x_min = b.at("x_min").get<double>();
      ann.box.y_min = b.at("y_min").get<double>();
      ann.box.x_max = b.at("x_max").get<double>();
      ann.box.y_max = b.at("y_max").get<double>();
      if (ann.class_id < 0 || !ann.box.valid())
        throw Error("box export: " + path + ": invalid box");
      img.boxes.push_back(ann);
    }
    out.push_back(std::move(img));
  }
  return out;
}

/// Rasterize a polygon with the even-odd rule sampled at pixel centers
/// (x + 0.5, y + 0.5). Vertices may lie outside the canvas; the output is
/// clipped to width x height.
inline BinaryMask rasterize_polygon(const PolygonAnnotation& poly, int width,
                                    int height) {
  if (width < 1 || height < 1)
    throw Error("rasterize_polygon: canvas dimensions must be >= 1");
  if (poly.vertices.size() < 3)
    throw Error("rasterize_polygon: polygon needs >= 3 vertices");

  BinaryMask mask(width, height);
  const std::size_t n = poly.vertices.size();
  std::vector<double> crossings;
  crossings.reserve(n);

  for (int y = 0; y < height; ++y) {
    const double py = y + 0.5;
    crossings.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& a = poly.vertices[i];
      const auto& b = poly.vertices[(i + 1) % n];
      // Half-open span in y so shared vertices count once.
      if ((a[1] <= py && py < b[1]) || (b[1] <= py && py < a[1])) {
        const double t = (py - a[1]) / (b[1] - a[1]);
        crossings.push_back(a[0] + t * (b[0] - a[0]));
      }
    }
    std::sort(crossings.begin(), crossings.end());
    // A center at px is inside iff the number of crossings > px is odd,
    // i.e. px lies in [c0,c1) of some sorted pair.
    for (std::size_t i = 0; i + 1 < crossings.size(); i += 2) {
      const int x_start =
          std::max(0, static_cast<int>(std::ceil(crossings[i] - 0.5)));
      const int x_end = std::min(
          width - 1, static_cast<int>(std::ceil(crossings[i + 1] - 0.5)) - 1);
      for (int x = x_start; x <= x_end; ++x) mask.set(x, y, 1);
    }
  }
  return mask;
}

}  // namespace palmscope
