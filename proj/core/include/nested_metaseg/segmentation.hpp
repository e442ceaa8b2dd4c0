#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "nested_metaseg/crop_pyramid.hpp"
#include "nested_metaseg/tensor.hpp"

namespace nested_metaseg {

/// Which distribution the predicted segmentation is the argmax of.
enum class PredictionSource {
  kMean,    // average of all merged fields
  kMerged,  // last merged field A_{n_crop}
};

/// Per-pixel argmax; ties go to the lowest class index.
LabelMap predict_labels(const ProbabilityField& distribution);
LabelMap predict_labels(const CropPyramid& pyramid, PredictionSource source = PredictionSource::kMean);

struct BoundingBox {
  int top = 0;
  int left = 0;
  int bottom = 0;  // inclusive
  int right = 0;   // inclusive
};

struct Segment {
  int id = 0;  // 1-based
  int label = 0;
  std::int64_t size = 0;
  std::int64_t interior = 0;
  std::int64_t boundary = 0;
  BoundingBox box;
  double center_row = 0.0;  // zero-based, vertical
  double center_col = 0.0;  // zero-based, horizontal
};

/// 8-connected components of equal labels. A pixel is interior when all
/// eight neighbours exist and belong to the same segment; pixels on the image
/// border are boundary pixels.
struct SegmentMap {
  int rows = 0;
  int cols = 0;
  std::vector<std::int32_t> ids;     // 0 = no segment
  std::vector<std::uint8_t> interior;  // 1 for interior pixels
  std::vector<Segment> segments;     // segments[id - 1]

  FrameShape shape() const noexcept { return {rows, cols}; }
  std::size_t index(int r, int c) const noexcept {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c);
  }
  const Segment& segment(int id) const { return segments.at(static_cast<std::size_t>(id - 1)); }
};

/// Ids are assigned in raster order of each component's first pixel.
/// Pixels carrying `skip_label` (if given) get id 0 and form no segment.
SegmentMap connected_components(const LabelMap& labels,
                                std::optional<std::int32_t> skip_label = std::nullopt);

/// Exact ratios of pixel counts for one predicted segment k with class c.
/// K' is the union of ground-truth components of class c meeting k; Q the
/// other predicted segments of class c meeting K'. IGNORE pixels are removed
/// from k before any set operation.
///   IoU     = |k n K'| / |k u K'|
///   IoU_adj = |k n K'| / |k u (K' \ Q)|
struct SegmentIoU {
  bool has_ground_truth = false;  // false when k lies entirely in IGNORE
  std::int64_t intersection = 0;
  std::int64_t union_size = 0;
  std::int64_t adjusted_union = 0;

  double iou() const noexcept {
    return union_size > 0 ? static_cast<double>(intersection) / static_cast<double>(union_size) : 0.0;
  }
  double iou_adj() const noexcept {
    return adjusted_union > 0
               ? static_cast<double>(intersection) / static_cast<double>(adjusted_union)
               : 0.0;
  }
};

/// Indexed like SegmentMap::segments. Throws GeometryError on shape mismatch.
std::vector<SegmentIoU> compute_iou(const SegmentMap& predicted, const LabelMap& ground_truth);

}  // namespace nested_metaseg
