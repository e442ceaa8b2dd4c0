#include "nested_metaseg/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "nested_metaseg/error.hpp"

namespace nested_metaseg {

std::vector<std::string> feature_catalog(int classes) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(kBaseFeatureCount + std::max(classes, 0)));
  for (std::string_view d : kDispersionNames) {
    const std::string base(d);
    names.push_back(base);
    names.push_back(base + "_bd");
    names.push_back(base + "_in");
    names.push_back(base + "_rel");
    names.push_back(base + "_rel_in");
  }
  for (const char* s : {"S", "S_in", "S_bd", "S_rel", "S_rel_in", "center_row", "center_col"}) {
    names.emplace_back(s);
  }
  for (int y = 0; y < classes; ++y) names.push_back("P_" + std::to_string(y));
  return names;
}

int MetricsTable::column_index(std::string_view name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  return it == columns.end() ? -1 : static_cast<int>(it - columns.begin());
}

std::size_t MetricsTable::labeled_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [](const auto& r) { return r.has_target(); }));
}

std::vector<SegmentRecord> extract_records(std::string_view image_id, const ProbabilityField& mean,
                                           const SegmentMap& segments, const DispersionMaps& maps,
                                           const std::vector<SegmentIoU>* iou) {
  const FrameShape shape = segments.shape();
  if (mean.shape() != shape) throw GeometryError("mean field and segment map differ in shape");
  const auto heat = maps.ordered();
  for (const HeatMap* h : heat) {
    if (h->shape() != shape) throw GeometryError("heat map and segment map differ in shape");
  }
  if (iou != nullptr && iou->size() != segments.segments.size()) {
    throw GeometryError("IoU results do not match the segment table");
  }

  const std::size_t n_seg = segments.segments.size();
  const std::size_t classes = static_cast<std::size_t>(mean.classes());
  // Per segment: [map][0 = interior, 1 = boundary] sums, class probability sums.
  std::vector<std::array<std::array<double, 2>, 7>> disp(n_seg);
  for (auto& d : disp) {
    for (auto& part : d) part = {0.0, 0.0};
  }
  std::vector<double> prob(n_seg * classes, 0.0);

  for (int r = 0; r < shape.rows; ++r) {
    for (int c = 0; c < shape.cols; ++c) {
      const std::size_t i = segments.index(r, c);
      const int id = segments.ids[i];
      if (id == 0) continue;
      const std::size_t k = static_cast<std::size_t>(id - 1);
      const int part = segments.interior[i] ? 0 : 1;
      for (std::size_t m = 0; m < 7; ++m) disp[k][m][static_cast<std::size_t>(part)] += heat[m]->values.data[i];
      const auto p = mean.pixel(r, c);
      for (std::size_t y = 0; y < classes; ++y) prob[k * classes + y] += p[y];
    }
  }

  std::vector<SegmentRecord> out;
  for (std::size_t k = 0; k < n_seg; ++k) {
    const Segment& s = segments.segments[k];
    if (s.interior < 1) continue;
    SegmentRecord rec;
    rec.image_id = std::string(image_id);
    rec.segment_id = s.id;
    rec.predicted_class = s.label;
    const double size = static_cast<double>(s.size);
    const double size_in = static_cast<double>(s.interior);
    const double size_bd = static_cast<double>(s.boundary);
    const double rel = size / size_bd;
    const double rel_in = size_in / size_bd;
    rec.features.reserve(static_cast<std::size_t>(kBaseFeatureCount) + classes);
    for (std::size_t m = 0; m < 7; ++m) {
      const double in_sum = disp[k][m][0];
      const double bd_sum = disp[k][m][1];
      const double whole = (in_sum + bd_sum) / size;
      const double in = in_sum / size_in;
      const double bd = bd_sum / size_bd;
      rec.features.insert(rec.features.end(), {whole, bd, in, whole * rel, in * rel_in});
    }
    rec.features.insert(rec.features.end(),
                        {size, size_in, size_bd, rel, rel_in, s.center_row, s.center_col});
    for (std::size_t y = 0; y < classes; ++y) rec.features.push_back(prob[k * classes + y] / size);
    if (iou != nullptr && (*iou)[k].has_ground_truth) {
      rec.iou = (*iou)[k].iou();
      rec.iou_adj = (*iou)[k].iou_adj();
    }
    out.push_back(std::move(rec));
  }
  return out;
}

MetricsTable make_table(int classes, std::vector<SegmentRecord> records, TableProvenance provenance) {
  MetricsTable t;
  t.columns = feature_catalog(classes);
  provenance.classes = classes;
  t.provenance = provenance;
  for (const auto& r : records) {
    if (r.features.size() != t.columns.size()) {
      throw ValidationError("record has " + std::to_string(r.features.size()) + " features, expected " +
                            std::to_string(t.columns.size()));
    }
  }
  t.records = std::move(records);
  return t;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) return std::nullopt;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<FeatureCorrelation> pearson_correlations(const MetricsTable& table) {
  std::vector<const SegmentRecord*> labeled;
  for (const auto& r : table.records) {
    if (r.has_target()) labeled.push_back(&r);
  }
  if (labeled.size() < 2) {
    throw DegenerateError("correlations need at least 2 records with IoU_adj, got " +
                          std::to_string(labeled.size()));
  }
  std::vector<double> target(labeled.size()), column(labeled.size());
  for (std::size_t i = 0; i < labeled.size(); ++i) target[i] = *labeled[i]->iou_adj;
  std::vector<FeatureCorrelation> out;
  for (std::size_t f = 0; f < table.columns.size(); ++f) {
    for (std::size_t i = 0; i < labeled.size(); ++i) column[i] = labeled[i]->features[f];
    out.push_back({table.columns[f], pearson(column, target)});
  }
  if (std::all_of(out.begin(), out.end(), [](const auto& c) { return !c.r; })) {
    // Either every feature is constant or the target is; only the latter is an error.
    if (!pearson(target, target)) throw DegenerateError("IoU_adj is constant over all records");
  }
  return out;
}

}  // namespace nested_metaseg
