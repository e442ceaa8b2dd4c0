#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nested_metaseg/tensor.hpp"

namespace nested_metaseg {

/// Per-pixel sum deviation beyond which a loaded field is rejected. Between
/// ProbabilityField::kSimplexTolerance and this bound the loader renormalizes
/// and warns.
inline constexpr double kRenormalizeLimit = 1e-3;

/// NPY v1.0, '<f4', C order, shape (H, W, C).
ProbabilityField load_probability_field(const std::filesystem::path& path);
void save_probability_field(const ProbabilityField& field, const std::filesystem::path& path);

/// Raw (H, W, C) float32 tensor without simplex checks.
Tensor3 load_tensor(const std::filesystem::path& path);
void save_tensor(const Tensor3& tensor, const std::filesystem::path& path);

/// NPY '<i4', shape (H, W). Values must be in [0, classes) or kIgnoreLabel.
LabelMap load_label_map(const std::filesystem::path& path, int classes);
void save_label_map(const LabelMap& labels, const std::filesystem::path& path);

/// NPY '<f4', shape (H, W). Values are stored as float32.
HeatMap load_heat_map(const std::filesystem::path& path, HeatMapKind kind = HeatMapKind::kOther);
void save_heat_map(const HeatMap& map, const std::filesystem::path& path);

/// Per-image entry of a dataset manifest. Paths are absolute after loading.
struct ManifestImage {
  std::string id;
  std::optional<std::filesystem::path> probs;     // single full-frame field
  std::vector<std::filesystem::path> probs_crops;  // one field per crop index
  std::optional<std::filesystem::path> labels;
};

struct DatasetManifest {
  int classes = 0;
  int crop_step = 1;  // c_l
  int n_crop = 0;
  std::vector<std::string> class_names;
  std::vector<ManifestImage> images;
};

/// JSON manifest:
///   { "classes": int, "c_l": int, "n_crop": int, "class_names": [str]?,
///     "images": [{ "id": str, "probs": path | "probs_crops": [path],
///                  "labels": path? }] }
/// Relative paths resolve against the manifest's directory.
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Writes paths relative to the manifest's directory where possible.
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Throws ValidationError on schema violations (c_l < 1, n_crop < 0, duplicate
/// ids, missing probability sources).
void validate_manifest(const DatasetManifest& manifest);

}  // namespace nested_metaseg
