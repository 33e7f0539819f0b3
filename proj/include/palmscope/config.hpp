// Run configuration: every knob the pipeline exposes, with a documented
// JSON schema. Field defaults are the library defaults; a config file only
// needs the keys it wants to change.
#pragma once

#include "palmscope/counting.hpp"
#include "palmscope/severity.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

namespace palmscope {

struct AugmentConfig {
  int variants_per_image = 4;
  std::array<double, 2> rotate_range_deg{-30.0, 30.0};
  std::array<double, 2> shear_h_range{-0.2, 0.2};
  std::array<double, 2> shear_v_range{-0.2, 0.2};
  std::array<double, 2> zoom_range{0.8, 1.2};
  double flip_h_prob = 0.5;
  double flip_v_prob = 0.5;
  std::optional<std::array<int, 2>> resize_to;  // applied before augmenting

  void validate() const {
    if (variants_per_image < 0)
      throw Error("augment.variants_per_image must be >= 0");
    for (const auto& range : {rotate_range_deg, shear_h_range, shear_v_range})
      if (range[0] > range[1]) throw Error("augment ranges need low <= high");
    if (zoom_range[0] <= 0.0 || zoom_range[0] > zoom_range[1])
      throw Error("augment.zoom_range must be positive with low <= high");
    for (double p : {flip_h_prob, flip_v_prob})
      if (p < 0.0 || p > 1.0) throw Error("augment flip probabilities must be in [0,1]");
    if (resize_to && ((*resize_to)[0] < 1 || (*resize_to)[1] < 1))
      throw Error("augment.resize_to dimensions must be >= 1");
  }
};

struct Config {
  int schema_version = 1;
  ColorScheme scheme;
  CountParams count_params;
  double iou_cut = 0.5;
  double conf_cut = 0.9;
  double nms_iou = 0.5;
  int caterpillar_class_id = 0;
  AugmentConfig augment;
  std::string output_dir = "out";
  int jobs = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (schema_version != 1) throw Error("config: unsupported schema_version");
    scheme.validate();
    count_params.validate();
    for (double cut : {iou_cut, conf_cut, nms_iou})
      if (cut < 0.0 || cut > 1.0)
        throw Error("config: iou_cut/conf_cut/nms_iou must be in [0,1]");
    if (caterpillar_class_id < 0)
      throw Error("config: caterpillar_class_id must be >= 0");
    if (jobs < 1) throw Error("config: jobs must be >= 1");
    augment.validate();
  }
};

namespace detail {

inline nlohmann::json rgb_to_json(Rgb c) {
  return nlohmann::json::array({c.r, c.g, c.b});
}

inline Rgb rgb_from_json(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != 3)
    throw Error(std::string("config: ") + what + " must be [r,g,b]");
  int v[3];
  for (int i = 0; i < 3; ++i) {
    v[i] = j[i].get<int>();
    if (v[i] < 0 || v[i] > 255)
      throw Error(std::string("config: ") + what + " channels must be 0..255");
  }
  return {static_cast<std::uint8_t>(v[0]), static_cast<std::uint8_t>(v[1]),
          static_cast<std::uint8_t>(v[2])};
}

inline nlohmann::json range_to_json(const HsvRange& r) {
  return {{"h", {r.low.h, r.up.h}},
          {"s", {r.low.s, r.up.s}},
          {"v", {r.low.v, r.up.v}},
          {"hue_wraps", r.hue_wraps}};
}

inline HsvRange range_from_json(const nlohmann::json& j, const char* what) {
  auto pair = [&](const char* key) {
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 2)
      throw Error(std::string("config: ") + what + "." + key + " must be [low,high]");
    return std::array<double, 2>{a[0].get<double>(), a[1].get<double>()};
  };
  HsvRange r;
  const auto h = pair("h");
  const auto s = pair("s");
  const auto v = pair("v");
  r.low = {h[0], s[0], v[0]};
  r.up = {h[1], s[1], v[1]};
  r.hue_wraps = j.value("hue_wraps", false);
  r.validate();
  return r;
}

}  // namespace detail

inline nlohmann::json config_to_json(const Config& c) {
  nlohmann::json threshold;
  if (c.count_params.threshold.use_otsu)
    threshold = "otsu";
  else
    threshold = c.count_params.threshold.fixed;
  nlohmann::json j{
      {"schema_version", c.schema_version},
      {"color_scheme",
       {{"green_marker", detail::rgb_to_json(c.scheme.green_marker)},
        {"brown_marker", detail::rgb_to_json(c.scheme.brown_marker)},
        {"background_marker", detail::rgb_to_json(c.scheme.background_marker)},
        {"green_range", detail::range_to_json(c.scheme.green_range)},
        {"brown_range", detail::range_to_json(c.scheme.brown_range)}}},
      {"count_params",
       {{"blur_kernel", c.count_params.blur_kernel},
        {"blur_sigma", c.count_params.blur_sigma},
        {"threshold", threshold},
        {"erode_kernel",
         c.count_params.erode_kernel == ErodeKernel::Cross3 ? "cross3" : "square3"},
        {"erode_iterations", c.count_params.erode_iterations},
        {"connectivity", c.count_params.connectivity},
        {"min_area", c.count_params.min_area}}},
      {"iou_cut", c.iou_cut},
      {"conf_cut", c.conf_cut},
      {"nms_iou", c.nms_iou},
      {"caterpillar_class_id", c.caterpillar_class_id},
      {"augment",
       {{"variants_per_image", c.augment.variants_per_image},
        {"rotate_range_deg", c.augment.rotate_range_deg},
        {"shear_h_range", c.augment.shear_h_range},
        {"shear_v_range", c.augment.shear_v_range},
        {"zoom_range", c.augment.zoom_range},
        {"flip_h_prob", c.augment.flip_h_prob},
        {"flip_v_prob", c.augment.flip_v_prob},
        {"resize_to", c.augment.resize_to
                          ? nlohmann::json(*c.augment.resize_to)
                          : nlohmann::json(nullptr)}}},
      {"output_dir", c.output_dir},
      {"jobs", c.jobs},
      {"seed", c.seed}};
  return j;
}

inline Config config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error("config: top level must be an object");
  Config c;
  try {
    c.schema_version = j.value("schema_version", 1);
    if (j.contains("color_scheme")) {
      const auto& s = j.at("color_scheme");
      if (s.contains("green_marker"))
        c.scheme.green_marker = detail::rgb_from_json(s.at("green_marker"), "green_marker");
      if (s.contains("brown_marker"))
        c.scheme.brown_marker = detail::rgb_from_json(s.at("brown_marker"), "brown_marker");
      if (s.contains("background_marker"))
        c.scheme.background_marker =
            detail::rgb_from_json(s.at("background_marker"), "background_marker");
      if (s.contains("green_range"))
        c.scheme.green_range = detail::range_from_json(s.at("green_range"), "green_range");
      if (s.contains("brown_range"))
        c.scheme.brown_range = detail::range_from_json(s.at("brown_range"), "brown_range");
    }
    if (j.contains("count_params")) {
      const auto& p = j.at("count_params");
      c.count_params.blur_kernel = p.value("blur_kernel", c.count_params.blur_kernel);
      c.count_params.blur_sigma = p.value("blur_sigma", c.count_params.blur_sigma);
      if (p.contains("threshold")) {
        const auto& t = p.at("threshold");
        if (t.is_string() && t.get<std::string>() == "otsu")
          c.count_params.threshold = ThresholdMode::otsu();
        else if (t.is_number_integer())
          c.count_params.threshold = ThresholdMode::fixed_at(t.get<int>());
        else
          throw Error("config: count_params.threshold must be \"otsu\" or an integer");
      }
      if (p.contains("erode_kernel")) {
        const std::string k = p.at("erode_kernel").get<std::string>();
        if (k == "cross3")
          c.count_params.erode_kernel = ErodeKernel::Cross3;
        else if (k == "square3")
          c.count_params.erode_kernel = ErodeKernel::Square3;
        else
          throw Error("config: erode_kernel must be cross3 or square3");
      }
      c.count_params.erode_iterations =
          p.value("erode_iterations", c.count_params.erode_iterations);
      c.count_params.connectivity = p.value("connectivity", c.count_params.connectivity);
      c.count_params.min_area = p.value("min_area", c.count_params.min_area);
    }
    c.iou_cut = j.value("iou_cut", c.iou_cut);
    c.conf_cut = j.value("conf_cut", c.conf_cut);
    c.nms_iou = j.value("nms_iou", c.nms_iou);
    c.caterpillar_class_id = j.value("caterpillar_class_id", c.caterpillar_class_id);
    if (j.contains("augment")) {
      const auto& a = j.at("augment");
      c.augment.variants_per_image =
          a.value("variants_per_image", c.augment.variants_per_image);
      auto get_range = [&](const char* key, std::array<double, 2>& out) {
        if (!a.contains(key)) return;
        const auto& r = a.at(key);
        if (!r.is_array() || r.size() != 2)
          throw Error(std::string("config: augment.") + key + " must be [low,high]");
        out = {r[0].get<double>(), r[1].get<double>()};
      };
      get_range("rotate_range_deg", c.augment.rotate_range_deg);
      get_range("shear_h_range", c.augment.shear_h_range);
      get_range("shear_v_range", c.augment.shear_v_range);
      get_range("zoom_range", c.augment.zoom_range);
      c.augment.flip_h_prob = a.value("flip_h_prob", c.augment.flip_h_prob);
      c.augment.flip_v_prob = a.value("flip_v_prob", c.augment.flip_v_prob);
      if (a.contains("resize_to") && !a.at("resize_to").is_null()) {
        const auto& r = a.at("resize_to");
        if (!r.is_array() || r.size() != 2)
          throw Error("config: augment.resize_to must be [width,height]");
        c.augment.resize_to = {{r[0].get<int>(), r[1].get<int>()}};
      }
    }
    c.output_dir = j.value("output_dir", c.output_dir);
    c.jobs = j.value("jobs", c.jobs);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw Error("config " + path.string() + ": invalid JSON: " + e.what());
  }
  return config_from_json(j);
}

inline void save_config(const Config& c, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write config: " + path.string());
  out << config_to_json(c).dump(2) << "\n";
}

}  // namespace palmscope
