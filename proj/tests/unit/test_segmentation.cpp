#include <gtest/gtest.h>

#include "nested_metaseg/error.hpp"
#include "nested_metaseg/segmentation.hpp"
#include "test_support.hpp"

using namespace nested_metaseg;

namespace {

LabelMap from_rows(std::vector<std::vector<int>> rows) {
  LabelMap m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) m.at(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  }
  return m;
}

// Shifts a map by (dr, dc) into a larger frame filled with `fill`.
LabelMap embed(const LabelMap& m, int rows, int cols, int dr, int dc, std::int32_t fill) {
  LabelMap out(rows, cols, fill);
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) out.at(r + dr, c + dc) = m.at(r, c);
  }
  return out;
}

}  // namespace

TEST(Predict, ArgmaxWithLowestIndexTies) {
  Tensor3 t(1, 3, 3, {0.5f, 0.5f, 0.0f, 0.2f, 0.3f, 0.5f, 0.0f, 1.0f, 0.0f});
  const LabelMap m = predict_labels(ProbabilityField(std::move(t)));
  EXPECT_EQ(m.data, (std::vector<std::int32_t>{0, 2, 1}));
}

TEST(Predict, SingleCropPyramidMatchesRawArgmax) {
  Rng rng(1);
  const std::vector<ProbabilityField> crops{nms_test::random_field(rng, 9, 9, 4)};
  const CropPyramid p = build_pyramid(crops, 1);
  EXPECT_EQ(predict_labels(p).data, predict_labels(crops[0]).data);
  EXPECT_EQ(predict_labels(p, PredictionSource::kMerged).data, predict_labels(crops[0]).data);
}

TEST(Components, UniformMap) {
  const SegmentMap s = connected_components(LabelMap(5, 7, 2));
  ASSERT_EQ(s.segments.size(), 1u);
  const Segment& k = s.segment(1);
  EXPECT_EQ(k.size, 35);
  EXPECT_EQ(k.interior, 15);
  EXPECT_EQ(k.boundary, 20);
  EXPECT_EQ(k.label, 2);
}

TEST(Components, DiagonalPixelsJoin) {
  const LabelMap m = from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  const SegmentMap s = connected_components(m);
  // The zeros at (0,1) and (1,0) also touch diagonally, so they join too.
  ASSERT_EQ(s.segments.size(), 2u);
  EXPECT_EQ(s.ids[s.index(0, 0)], s.ids[s.index(2, 2)]);
  EXPECT_EQ(s.segment(s.ids[s.index(0, 0)]).size, 3);
}

TEST(Components, SkipLabelFormsNoSegment) {
  const LabelMap m = from_rows({{255, 1}, {255, 1}});
  const SegmentMap s = connected_components(m, kIgnoreLabel);
  ASSERT_EQ(s.segments.size(), 1u);
  EXPECT_EQ(s.ids[0], 0);
}

TEST(Components, MatchFloodFillOracle) {
  Rng rng(100);
  for (int trial = 0; trial < 100; ++trial) {
    const LabelMap m = trial % 2 ? nms_test::random_labels(rng, 16, 16, rng.uniform_int(2, 4))
                                 : nms_test::random_rectangles(rng, 16, 16, 4, 5);
    const SegmentMap s = connected_components(m);
    const std::vector<int> oracle = nms_test::flood_fill(m);
    ASSERT_EQ(s.ids, std::vector<std::int32_t>(oracle.begin(), oracle.end()));
    std::int64_t total = 0;
    for (const Segment& k : s.segments) {
      ASSERT_EQ(k.size, k.interior + k.boundary);
      total += k.size;
    }
    ASSERT_EQ(total, 256);
    // Interior by direct neighbourhood inspection.
    for (int r = 0; r < 16; ++r) {
      for (int c = 0; c < 16; ++c) {
        bool inside = r > 0 && c > 0 && r < 15 && c < 15;
        for (int dr = -1; inside && dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) inside = inside && oracle[m.index(r + dr, c + dc)] == oracle[m.index(r, c)];
        }
        ASSERT_EQ(s.interior[s.index(r, c)] != 0, inside);
      }
    }
  }
}

TEST(Components, RectangleCenterIsCentroid) {
  LabelMap m(10, 12, 0);
  for (int r = 2; r <= 6; ++r) {
    for (int c = 3; c <= 10; ++c) m.at(r, c) = 1;
  }
  const SegmentMap s = connected_components(m);
  const Segment& k = s.segment(s.ids[s.index(2, 3)]);
  EXPECT_DOUBLE_EQ(k.center_row, 4.0);
  EXPECT_DOUBLE_EQ(k.center_col, 6.5);
  EXPECT_EQ(k.box.top, 2);
  EXPECT_EQ(k.box.right, 10);
}

TEST(Iou, IdenticalAndDisjoint) {
  const LabelMap gt = from_rows({{1, 1, 0}, {1, 1, 0}, {0, 0, 0}});
  const auto same = compute_iou(connected_components(gt), gt);
  for (const auto& r : same) {
    EXPECT_EQ(r.iou(), 1.0);
    EXPECT_EQ(r.iou_adj(), 1.0);
  }
  const LabelMap pred = from_rows({{0, 0, 0}, {0, 0, 0}, {0, 0, 2}});
  const SegmentMap ps = connected_components(pred);
  const auto res = compute_iou(ps, gt);
  const SegmentIoU& two = res[static_cast<std::size_t>(ps.ids[ps.index(2, 2)] - 1)];
  EXPECT_TRUE(two.has_ground_truth);
  EXPECT_EQ(two.iou(), 0.0);
  EXPECT_EQ(two.iou_adj(), 0.0);
}

TEST(Iou, AdjustedUnionCreditsSplitSegments) {
  // Ground truth: one class-1 bar. Prediction: the bar split in two by a
  // class-0 column. Each half has IoU 2/5 but IoU_adj 1.
  const LabelMap gt = from_rows({{1, 1, 1, 1, 1}});
  const LabelMap pred = from_rows({{1, 1, 0, 1, 1}});
  const SegmentMap ps = connected_components(pred);
  const auto res = compute_iou(ps, gt);
  const SegmentIoU& left = res[static_cast<std::size_t>(ps.ids[0] - 1)];
  EXPECT_EQ(left.intersection, 2);
  EXPECT_EQ(left.union_size, 5);
  EXPECT_EQ(left.adjusted_union, 3);
}

TEST(Iou, IgnoredPixelsAreRemoved) {
  const LabelMap gt = from_rows({{1, 1, 255}, {255, 255, 255}});
  const LabelMap pred = from_rows({{1, 1, 1}, {0, 0, 0}});
  const SegmentMap ps = connected_components(pred);
  const auto res = compute_iou(ps, gt);
  const SegmentIoU& one = res[static_cast<std::size_t>(ps.ids[0] - 1)];
  EXPECT_EQ(one.iou(), 1.0);
  const SegmentIoU& zero = res[static_cast<std::size_t>(ps.ids[ps.index(1, 0)] - 1)];
  EXPECT_FALSE(zero.has_ground_truth);
}

TEST(Iou, ShapeMismatchIsGeometryError) {
  EXPECT_THROW(compute_iou(connected_components(LabelMap(3, 3)), LabelMap(3, 4)), GeometryError);
}

TEST(Iou, MatchesBruteForceOracle) {
  Rng rng(200);
  for (int trial = 0; trial < 200; ++trial) {
    const int classes = rng.uniform_int(2, 4);
    LabelMap gt = nms_test::random_rectangles(rng, 8, 8, classes, rng.uniform_int(2, 4));
    const LabelMap pred = nms_test::random_rectangles(rng, 8, 8, classes, rng.uniform_int(2, 4));
    if (trial % 4 == 0) {
      for (int c = 0; c < 8; ++c) gt.at(7, c) = kIgnoreLabel;
    }
    const auto oracle = nms_test::brute_force_iou(pred, gt);
    const auto res = compute_iou(connected_components(pred), gt);
    ASSERT_EQ(res.size(), oracle.size());
    for (std::size_t k = 0; k < res.size(); ++k) {
      ASSERT_EQ(res[k].has_ground_truth, oracle[k].has_ground_truth) << trial;
      if (!res[k].has_ground_truth) continue;
      ASSERT_EQ(res[k].intersection, oracle[k].intersection) << trial;
      ASSERT_EQ(res[k].union_size, oracle[k].union_size) << trial;
      ASSERT_EQ(res[k].adjusted_union, oracle[k].adjusted_union) << trial;
    }
  }
}

TEST(Iou, TranslationInvariant) {
  Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const LabelMap gt = nms_test::random_rectangles(rng, 8, 8, 3, 3);
    const LabelMap pred = nms_test::random_rectangles(rng, 8, 8, 3, 3);
    // Pad with a class that appears nowhere else so no segment merges.
    const LabelMap gt2 = embed(gt, 13, 11, 3, 2, 5), pred2 = embed(pred, 13, 11, 3, 2, 6);
    const SegmentMap a = connected_components(pred), b = connected_components(pred2);
    const auto ra = compute_iou(a, gt), rb = compute_iou(b, gt2);
    for (int r = 0; r < 8; ++r) {
      for (int c = 0; c < 8; ++c) {
        const auto& x = ra[static_cast<std::size_t>(a.ids[a.index(r, c)] - 1)];
        const auto& y = rb[static_cast<std::size_t>(b.ids[b.index(r + 3, c + 2)] - 1)];
        ASSERT_EQ(x.iou(), y.iou());
        ASSERT_EQ(x.iou_adj(), y.iou_adj());
      }
    }
  }
}
