#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nested_metaseg/dispersion.hpp"
#include "nested_metaseg/segmentation.hpp"

namespace nested_metaseg {

/// Number of metrics besides the per-class mean probabilities.
inline constexpr int kBaseFeatureCount = 42;

/// Canonical feature order, used for CSV columns, model inputs and reports:
///
///   for D in mu_E, mu_M, mu_V, v_E, v_M, v_V, K:
///       D, D_bd, D_in, D_rel (= D * S_rel), D_rel_in (= D_in * S_rel_in)
///   S, S_in, S_bd, S_rel (= S / S_bd), S_rel_in (= S_in / S_bd)
///   center_row, center_col
///   P_0 .. P_{C-1}
std::vector<std::string> feature_catalog(int classes);

/// Dispersion prefixes in catalog order.
inline constexpr std::string_view kDispersionNames[7] = {"mu_E", "mu_M", "mu_V", "v_E",
                                                         "v_M",  "v_V",  "K"};

struct SegmentRecord {
  std::string image_id;
  int segment_id = 0;
  int predicted_class = 0;
  std::vector<double> features;  // catalog order
  std::optional<double> iou;
  std::optional<double> iou_adj;

  bool has_target() const noexcept { return iou_adj.has_value(); }
};

struct TableProvenance {
  int classes = 0;
  int n_crop = 0;
  int crop_step = 1;
  PredictionSource prediction_source = PredictionSource::kMean;
};

struct MetricsTable {
  std::vector<std::string> columns;  // feature_catalog(classes)
  std::vector<SegmentRecord> records;
  TableProvenance provenance;

  int column_index(std::string_view name) const;  // -1 if absent
  std::size_t labeled_count() const noexcept;
};

/// One record per segment with non-empty interior. Heat maps and the mean
/// field must share the segment map's shape. Targets are filled only when
/// `iou` is given and the segment has ground truth.
std::vector<SegmentRecord> extract_records(std::string_view image_id, const ProbabilityField& mean,
                                           const SegmentMap& segments, const DispersionMaps& maps,
                                           const std::vector<SegmentIoU>* iou = nullptr);

MetricsTable make_table(int classes, std::vector<SegmentRecord> records, TableProvenance provenance);

/// CSV: image_id,segment_id,class,<catalog...>,iou,iou_adj. Missing targets are
/// empty cells; numbers use shortest round-trip formatting.
void write_metrics_csv(const MetricsTable& table, const std::filesystem::path& path);
MetricsTable read_metrics_csv(const std::filesystem::path& path);

/// JSON sidecar with the table provenance and column list.
void write_provenance(const MetricsTable& table, const std::filesystem::path& path);
TableProvenance read_provenance(const std::filesystem::path& path);

std::string_view prediction_source_name(PredictionSource source) noexcept;
PredictionSource parse_prediction_source(std::string_view name);

struct FeatureCorrelation {
  std::string feature;
  std::optional<double> r;  // nullopt when the feature has zero variance
};

/// Pearson r of every feature against IoU_adj over labeled records. Throws
/// DegenerateError with fewer than two labeled records or a constant target.
std::vector<FeatureCorrelation> pearson_correlations(const MetricsTable& table);

/// Plain Pearson correlation; nullopt when either input has zero variance.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

/// Named feature groups: all, all-no-variance, entropy-baseline, metaseg-2018,
/// mu_E, mu_E+v_E, mu_M, mu_M+v_M, mu_V, mu_V+v_V, K, P, sizes, sizes+center.
/// A comma-separated list mixes group and feature names; the result follows
/// catalog order without duplicates. Throws ValidationError on unknown names.
std::vector<std::string> resolve_feature_set(std::string_view spec, int classes);
std::vector<std::string> feature_set_names();

}  // namespace nested_metaseg
