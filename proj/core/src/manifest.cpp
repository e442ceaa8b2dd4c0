#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "nested_metaseg/error.hpp"
#include "nested_metaseg/tensor_io.hpp"

namespace nested_metaseg {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

std::string relativize(const fs::path& base, const fs::path& p) {
  const fs::path rel = p.lexically_relative(base);
  if (rel.empty() || *rel.begin() == "..") return p.generic_string();
  return rel.generic_string();
}

template <class T>
T get_required(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw FormatError(where + ": missing required key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(where + ": key '" + key + "' has the wrong type (" + e.what() + ")");
  }
}

}  // namespace

void validate_manifest(const DatasetManifest& m) {
  if (m.classes < 2 || m.classes >= kIgnoreLabel) {
    throw ValidationError("manifest: classes must be in [2, 255), got " + std::to_string(m.classes));
  }
  if (m.crop_step < 1) throw ValidationError("manifest: c_l must be >= 1");
  if (m.n_crop < 0) throw ValidationError("manifest: n_crop must be >= 0");
  if (!m.class_names.empty() && static_cast<int>(m.class_names.size()) != m.classes) {
    throw ValidationError("manifest: class_names must list exactly `classes` names");
  }
  std::set<std::string> ids;
  for (const auto& img : m.images) {
    if (img.id.empty()) throw ValidationError("manifest: image id must not be empty");
    if (!ids.insert(img.id).second) throw ValidationError("manifest: duplicate image id '" + img.id + "'");
    if (!img.probs && img.probs_crops.empty()) {
      throw ValidationError("manifest: image '" + img.id + "' has neither probs nor probs_crops");
    }
  }
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": invalid JSON (" + e.what() + ")");
  }
  const std::string where = path.string();
  if (!j.is_object()) throw FormatError(where + ": manifest must be a JSON object");

  const fs::path base = fs::absolute(path).parent_path();
  DatasetManifest m;
  m.classes = get_required<int>(j, "classes", where);
  m.crop_step = get_required<int>(j, "c_l", where);
  m.n_crop = get_required<int>(j, "n_crop", where);
  if (j.contains("class_names")) m.class_names = j.at("class_names").get<std::vector<std::string>>();

  const json images = get_required<json>(j, "images", where);
  if (!images.is_array()) throw FormatError(where + ": 'images' must be an array");
  for (const json& e : images) {
    ManifestImage img;
    img.id = get_required<std::string>(e, "id", where);
    if (e.contains("probs")) img.probs = resolve(base, e.at("probs").get<std::string>());
    if (e.contains("probs_crops")) {
      for (const auto& p : e.at("probs_crops")) img.probs_crops.push_back(resolve(base, p.get<std::string>()));
    }
    if (e.contains("labels") && !e.at("labels").is_null()) {
      img.labels = resolve(base, e.at("labels").get<std::string>());
    }
    m.images.push_back(std::move(img));
  }
  validate_manifest(m);
  for (const auto& img : m.images) {
    auto check = [&](const fs::path& p) {
      if (!fs::exists(p)) throw IoError(where + ": image '" + img.id + "' references missing file '" + p.string() + "'");
    };
    if (img.probs) check(*img.probs);
    for (const auto& p : img.probs_crops) check(p);
    if (img.labels) check(*img.labels);
  }
  return m;
}

void save_manifest(const DatasetManifest& m, const fs::path& path) {
  const fs::path base = fs::absolute(path).parent_path();
  json j;
  j["classes"] = m.classes;
  j["c_l"] = m.crop_step;
  j["n_crop"] = m.n_crop;
  if (!m.class_names.empty()) j["class_names"] = m.class_names;
  json images = json::array();
  for (const auto& img : m.images) {
    json e;
    e["id"] = img.id;
    if (img.probs) e["probs"] = relativize(base, fs::absolute(*img.probs));
    if (!img.probs_crops.empty()) {
      json crops = json::array();
      for (const auto& p : img.probs_crops) crops.push_back(relativize(base, fs::absolute(p)));
      e["probs_crops"] = crops;
    }
    if (img.labels) e["labels"] = relativize(base, fs::absolute(*img.labels));
    images.push_back(e);
  }
  j["images"] = images;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
}

}  // namespace nested_metaseg
