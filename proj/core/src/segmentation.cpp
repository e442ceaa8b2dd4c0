#include "nested_metaseg/segmentation.hpp"

#include <algorithm>
#include <numeric>

#include "nested_metaseg/error.hpp"

namespace nested_metaseg {
namespace {

class DisjointSets {
 public:
  int make() {
    parent_.push_back(static_cast<int>(parent_.size()));
    return parent_.back();
  }
  int find(int x) {
    while (parent_[static_cast<std::size_t>(x)] != x) {
      auto& p = parent_[static_cast<std::size_t>(x)];
      p = parent_[static_cast<std::size_t>(p)];
      x = p;
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) std::swap(a, b);
    parent_[static_cast<std::size_t>(a)] = b;
  }

 private:
  std::vector<int> parent_;
};

}  // namespace

LabelMap predict_labels(const ProbabilityField& distribution) {
  LabelMap out(distribution.rows(), distribution.cols());
  for (int r = 0; r < distribution.rows(); ++r) {
    for (int c = 0; c < distribution.cols(); ++c) {
      const auto p = distribution.pixel(r, c);
      int best = 0;
      for (int y = 1; y < static_cast<int>(p.size()); ++y) {
        if (p[static_cast<std::size_t>(y)] > p[static_cast<std::size_t>(best)]) best = y;
      }
      out.at(r, c) = best;
    }
  }
  return out;
}

LabelMap predict_labels(const CropPyramid& pyramid, PredictionSource source) {
  if (pyramid.merged.empty()) throw GeometryError("empty crop pyramid");
  return predict_labels(source == PredictionSource::kMean ? pyramid.mean : pyramid.merged.back());
}

SegmentMap connected_components(const LabelMap& labels, std::optional<std::int32_t> skip_label) {
  SegmentMap out;
  out.rows = labels.rows;
  out.cols = labels.cols;
  const std::size_t n = labels.data.size();
  out.ids.assign(n, 0);
  out.interior.assign(n, 0);

  auto skipped = [&](std::int32_t v) { return skip_label && v == *skip_label; };

  // First pass: provisional labels, merging with already visited
  // 8-neighbours (W, NW, N, NE).
  DisjointSets sets;
  std::vector<int> provisional(n, -1);
  for (int r = 0; r < labels.rows; ++r) {
    for (int c = 0; c < labels.cols; ++c) {
      const std::int32_t v = labels.at(r, c);
      if (skipped(v)) continue;
      int current = -1;
      const int nbr[4][2] = {{r, c - 1}, {r - 1, c - 1}, {r - 1, c}, {r - 1, c + 1}};
      for (const auto& q : nbr) {
        if (q[0] < 0 || q[1] < 0 || q[1] >= labels.cols) continue;
        if (labels.at(q[0], q[1]) != v) continue;
        const int other = provisional[labels.index(q[0], q[1])];
        if (current < 0) {
          current = other;
        } else {
          sets.unite(current, other);
        }
      }
      if (current < 0) current = sets.make();
      provisional[labels.index(r, c)] = current;
    }
  }

  // Second pass: final ids in raster order of first appearance.
  std::vector<int> final_id;
  for (int r = 0; r < labels.rows; ++r) {
    for (int c = 0; c < labels.cols; ++c) {
      const std::size_t i = labels.index(r, c);
      if (provisional[i] < 0) continue;
      const auto root = static_cast<std::size_t>(sets.find(provisional[i]));
      if (root >= final_id.size()) final_id.resize(root + 1, 0);
      if (final_id[root] == 0) {
        out.segments.emplace_back();
        Segment& s = out.segments.back();
        s.id = static_cast<int>(out.segments.size());
        s.label = labels.data[i];
        s.box = {r, c, r, c};
        final_id[root] = s.id;
      }
      out.ids[i] = final_id[root];
    }
  }

  std::vector<double> row_sum(out.segments.size(), 0.0), col_sum(out.segments.size(), 0.0);
  for (int r = 0; r < labels.rows; ++r) {
    for (int c = 0; c < labels.cols; ++c) {
      const std::size_t i = labels.index(r, c);
      const int id = out.ids[i];
      if (id == 0) continue;
      Segment& s = out.segments[static_cast<std::size_t>(id - 1)];
      ++s.size;
      row_sum[static_cast<std::size_t>(id - 1)] += r;
      col_sum[static_cast<std::size_t>(id - 1)] += c;
      s.box.top = std::min(s.box.top, r);
      s.box.bottom = std::max(s.box.bottom, r);
      s.box.left = std::min(s.box.left, c);
      s.box.right = std::max(s.box.right, c);

      bool inner = r > 0 && c > 0 && r + 1 < labels.rows && c + 1 < labels.cols;
      for (int dr = -1; inner && dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (out.ids[labels.index(r + dr, c + dc)] != id) {
            inner = false;
            break;
          }
        }
      }
      if (inner) {
        out.interior[i] = 1;
        ++s.interior;
      } else {
        ++s.boundary;
      }
    }
  }
  for (std::size_t k = 0; k < out.segments.size(); ++k) {
    Segment& s = out.segments[k];
    s.center_row = row_sum[k] / static_cast<double>(s.size);
    s.center_col = col_sum[k] / static_cast<double>(s.size);
  }
  return out;
}

std::vector<SegmentIoU> compute_iou(const SegmentMap& predicted, const LabelMap& ground_truth) {
  if (predicted.shape() != ground_truth.shape()) {
    throw GeometryError("prediction " + to_string(predicted.shape()) + " and ground truth " +
                        to_string(ground_truth.shape()) + " differ in shape");
  }
  const SegmentMap truth = connected_components(ground_truth, kIgnoreLabel);
  const std::size_t n_pred = predicted.segments.size();
  const std::size_t n_true = truth.segments.size();

  std::vector<std::int64_t> valid_size(n_pred, 0);      // |k'|
  std::vector<std::int64_t> same_class_hits(n_true, 0);  // pixels of g predicted as class(g)
  std::vector<std::uint64_t> pairs;                      // (k, g) per same-class pixel

  for (std::size_t i = 0; i < predicted.ids.size(); ++i) {
    const int k = predicted.ids[i];
    const int g = truth.ids[i];
    if (k == 0 || g == 0) continue;  // g == 0: IGNORE
    ++valid_size[static_cast<std::size_t>(k - 1)];
    const Segment& ks = predicted.segments[static_cast<std::size_t>(k - 1)];
    const Segment& gs = truth.segments[static_cast<std::size_t>(g - 1)];
    if (ks.label != gs.label) continue;
    ++same_class_hits[static_cast<std::size_t>(g - 1)];
    pairs.push_back((static_cast<std::uint64_t>(k - 1) << 32) | static_cast<std::uint64_t>(g - 1));
  }
  std::sort(pairs.begin(), pairs.end());

  std::vector<SegmentIoU> out(n_pred);
  std::vector<std::int64_t> truth_union(n_pred, 0), truth_hits(n_pred, 0);
  for (std::size_t a = 0; a < pairs.size();) {
    std::size_t b = a;
    while (b < pairs.size() && pairs[b] == pairs[a]) ++b;
    const std::size_t k = static_cast<std::size_t>(pairs[a] >> 32);
    const std::size_t g = static_cast<std::size_t>(pairs[a] & 0xFFFFFFFFu);
    out[k].intersection += static_cast<std::int64_t>(b - a);
    truth_union[k] += truth.segments[g].size;
    truth_hits[k] += same_class_hits[g];
    a = b;
  }
  for (std::size_t k = 0; k < n_pred; ++k) {
    SegmentIoU& res = out[k];
    res.has_ground_truth = valid_size[k] > 0;
    if (!res.has_ground_truth) continue;
    res.union_size = valid_size[k] + truth_union[k] - res.intersection;
    res.adjusted_union = valid_size[k] + truth_union[k] - truth_hits[k];
  }
  return out;
}

}  // namespace nested_metaseg
