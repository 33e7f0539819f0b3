// Manifest: the per-run list of images and their sidecar files. Relative
// paths resolve against the manifest's own directory.
#pragma once

#include "palmscope/image.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace palmscope {

struct ManifestRecord {
  std::string image_id;
  std::filesystem::path image_path;
  std::optional<std::filesystem::path> annotation_path;
  std::optional<std::filesystem::path> detection_path;
  std::optional<long> truth_count;
};

struct Manifest {
  int schema_version = 1;
  std::vector<ManifestRecord> records;
};

inline Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw Error("manifest " + path.string() + ": invalid JSON: " + e.what());
  }
  if (!j.is_object() || !j.contains("records") || !j.at("records").is_array())
    throw Error("manifest: expected object with a records array");

  const std::filesystem::path base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };

  Manifest m;
  m.schema_version = j.value("schema_version", 1);
  if (m.schema_version != 1) throw Error("manifest: unsupported schema_version");

  std::set<std::string> seen;
  try {
    for (std::size_t i = 0; i < j.at("records").size(); ++i) {
      const auto& rec = j.at("records")[i];
      const std::string where = "records[" + std::to_string(i) + "]";
      if (!rec.is_object() || !rec.contains("image_id") || !rec.contains("image_path"))
        throw Error("manifest: " + where + " needs image_id and image_path");
      ManifestRecord out;
      out.image_id = rec.at("image_id").get<std::string>();
      if (!seen.insert(out.image_id).second)
        throw Error("manifest: duplicate image_id \"" + out.image_id + "\"");
      out.image_path = resolve(rec.at("image_path").get<std::string>());
      if (rec.contains("annotation_path") && !rec.at("annotation_path").is_null())
        out.annotation_path = resolve(rec.at("annotation_path").get<std::string>());
      if (rec.contains("detection_path") && !rec.at("detection_path").is_null())
        out.detection_path = resolve(rec.at("detection_path").get<std::string>());
      if (rec.contains("truth_count") && !rec.at("truth_count").is_null())
        out.truth_count = rec.at("truth_count").get<long>();
      m.records.push_back(std::move(out));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("manifest: ") + e.what());
  }
  return m;
}

}  // namespace palmscope
