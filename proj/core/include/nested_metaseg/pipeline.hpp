#pragma once

// End-to-end orchestration: crop fields -> pyramid -> heat maps -> segments
// -> metrics table -> meta models, plus the file layout shared by the CLI
// stage commands.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nested_metaseg/crop_pyramid.hpp"
#include "nested_metaseg/dispersion.hpp"
#include "nested_metaseg/meta.hpp"
#include "nested_metaseg/metrics.hpp"
#include "nested_metaseg/segmentation.hpp"
#include "nested_metaseg/tensor_io.hpp"

namespace nested_metaseg {

struct RunConfig {
  std::uint64_t seed = 0;
  int runs = 10;
  std::optional<int> crop_step;  // overrides the manifest's c_l
  std::optional<int> n_crop;     // overrides the manifest's N_crop
  bool simulate_crops = false;   // derive crops from one full-frame field
  PredictionSource prediction_source = PredictionSource::kMean;
  int threads = 0;               // 0: NESTED_METASEG_THREADS, else all cores
  MetaConfig meta;
  bool with_mlp = false;         // add both MLP models to the protocol
  std::vector<std::string> feature_sets = {"all", "entropy-baseline"};
  int greedy_max = 0;            // 0 disables greedy selection
  bool write_heatmaps = false;   // heat_*.npy per image
  bool write_pyramid = false;    // A_i.npy and A_mean.npy per image
  bool render = true;            // PGM / PPM figures per image

  /// Throws ValidationError for out-of-range values.
  void validate() const;
};

/// JSON object with any of: seed, runs, c_l, n_crop, simulate_crops,
/// predict_from, threads, with_mlp, feature_sets, greedy_max, write_heatmaps,
/// write_pyramid, render, logistic {max_iterations, gradient_tolerance},
/// linear {ridge}, mlp {hidden, l2, learning_rate, epochs, seed}.
/// Keys absent from the file keep the values already in `base`.
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});
std::string run_config_json(const RunConfig& config);

/// Effective crop parameters of a manifest under a run config.
struct CropSettings {
  int crop_step = 1;
  int n_crop = 0;
  bool simulate = false;
};
CropSettings crop_settings(const DatasetManifest& manifest, const RunConfig& config);

/// Crop fields 0..n_crop of one image: the stored per-crop files, or crops
/// simulated from a single full-frame field.
std::vector<ProbabilityField> load_crop_fields(const ManifestImage& image, const CropSettings& crops,
                                               int classes);

/// Everything derived from one image.
struct ImageAnalysis {
  std::string id;
  ProbabilityField base;  // A_0
  ProbabilityField mean;  // A_bar
  DispersionMaps maps;
  LabelMap prediction;
  SegmentMap segments;
  std::optional<std::vector<SegmentIoU>> iou;
  std::vector<SegmentRecord> records;
};

/// `visit` (optional) receives every merged field A_i.
ImageAnalysis analyze_image(std::string id, std::span<const ProbabilityField> crop_fields, int crop_step,
                            const LabelMap* ground_truth, PredictionSource source,
                            const MergedFieldVisitor& visit = {});

/// Heat map file stem, e.g. "heat_mu_M".
std::string heat_map_stem(HeatMapKind kind);

/// Writes heat_<name>.npy for all seven maps into `dir`.
void save_dispersion_maps(const DispersionMaps& maps, const std::filesystem::path& dir);
DispersionMaps load_dispersion_maps(const std::filesystem::path& dir);

/// segments.npy (int32 ids) and segments.json (table plus IoU when known).
void save_segments(const SegmentMap& segments, const std::optional<std::vector<SegmentIoU>>& iou,
                   const std::filesystem::path& dir);

struct PipelineSummary {
  std::size_t images = 0;
  std::size_t records = 0;
  std::size_t labeled_records = 0;
  bool meta_ran = false;
  std::string meta_skipped_reason;
};

/// Runs every stage for a manifest and writes into `out_dir`:
///   run.json, metrics.csv, metrics.json, correlations.csv,
///   meta/report.{json,txt}, meta/<model>.json,
///   greedy/{acc,r2}.{json,csv} (if greedy_max > 0),
///   images/<id>/{mu_M.pgm, K.pgm, iou_adj.ppm, predicted_iou_adj.ppm}.
/// Images are processed on up to `threads` workers; outputs do not depend
/// on the thread count.
PipelineSummary run_pipeline(const DatasetManifest& manifest, const RunConfig& config,
                             const std::filesystem::path& out_dir);

/// Correlations as "feature,r" lines; undefined correlations are empty.
std::string format_correlations_csv(const std::vector<FeatureCorrelation>& correlations);

}  // namespace nested_metaseg
