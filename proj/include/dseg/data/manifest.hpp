#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dseg/core/components.hpp"
#include "dseg/core/error.hpp"
#include "dseg/core/png_io.hpp"
#include "dseg/core/raster.hpp"

namespace dseg::data {

/// One image/mask pair. Paths are as written in the manifest (relative to its
/// directory); the pixel data is held in memory once loaded or generated.
struct DatasetRecord {
  std::string image_ref;
  std::string mask_ref;
  std::string patient_id;
  std::vector<Box> gt_boxes;
  Image image;
  Mask mask;
};

inline std::vector<Box> derive_boxes(const Mask& mask) {
  std::vector<Box> out;
  for (const auto& p : component_boxes(mask)) out.push_back(p.to_box());
  return out;
}

/// Distinct patient ids in order of first appearance.
inline std::vector<std::string> patients_of(const std::vector<DatasetRecord>& records) {
  std::vector<std::string> out;
  for (const auto& r : records)
    if (std::find(out.begin(), out.end(), r.patient_id) == out.end()) out.push_back(r.patient_id);
  return out;
}

inline std::vector<DatasetRecord> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw load_error("cannot open manifest " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw load_error("manifest " + path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw load_error("manifest " + path.string() + " must be a JSON array");
  const auto base = path.parent_path();
  std::vector<DatasetRecord> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& e = doc[i];
    const std::string where = "manifest record " + std::to_string(i);
    DatasetRecord r;
    try {
      r.image_ref = e.at("image").get<std::string>();
      r.mask_ref = e.at("mask").get<std::string>();
      r.patient_id = e.at("patient").get<std::string>();
    } catch (const nlohmann::json::exception& ex) {
      throw load_error(where + ": " + ex.what());
    }
    try {
      r.image = load_image_png(base / r.image_ref);
      r.mask = load_mask_png(base / r.mask_ref);
    } catch (const load_error& ex) {
      throw load_error(where + " (" + r.image_ref + "): " + ex.what());
    }
    if (r.image.height != r.mask.height || r.image.width != r.mask.width)
      throw load_error(where + " (" + r.image_ref + "): image and mask dimensions differ");
    if (e.contains("boxes")) {
      for (const auto& b : e["boxes"]) {
        const auto v = b.get<std::vector<double>>();
        if (v.size() != 4) throw load_error(where + ": box needs 4 coordinates");
        r.gt_boxes.push_back({v[0], v[1], v[2], v[3]});
      }
    } else {
      r.gt_boxes = derive_boxes(r.mask);
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline nlohmann::json manifest_json(const std::vector<DatasetRecord>& records, bool with_boxes = true) {
  auto doc = nlohmann::json::array();
  for (const auto& r : records) {
    nlohmann::json e{{"image", r.image_ref}, {"mask", r.mask_ref}, {"patient", r.patient_id}};
    if (with_boxes) {
      auto boxes = nlohmann::json::array();
      for (const auto& b : r.gt_boxes) boxes.push_back({b.x_min, b.y_min, b.x_max, b.y_max});
      e["boxes"] = boxes;
    }
    doc.push_back(std::move(e));
  }
  return doc;
}

/// Writes text to `path` via a temporary sibling and rename.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw error("cannot write " + tmp.string());
    out << text;
    if (!out) throw error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

/// Writes the manifest only; image and mask files are expected at their refs.
inline void write_manifest(const std::filesystem::path& path, const std::vector<DatasetRecord>& records) {
  write_file_atomic(path, manifest_json(records).dump(2) + "\n");
}

/// Writes every record's PNGs under `dir` at their refs, plus manifest.json.
inline void write_dataset(const std::filesystem::path& dir, const std::vector<DatasetRecord>& records) {
  for (const auto& r : records) {
    std::filesystem::create_directories((dir / r.image_ref).parent_path());
    std::filesystem::create_directories((dir / r.mask_ref).parent_path());
    save_image_png(dir / r.image_ref, r.image);
    save_mask_png(dir / r.mask_ref, r.mask);
  }
  write_manifest(dir / "manifest.json", records);
}

}  // namespace dseg::data
