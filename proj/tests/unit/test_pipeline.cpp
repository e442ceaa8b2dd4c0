#include <gtest/gtest.h>

#include <fstream>

#include "nested_metaseg/error.hpp"
#include "nested_metaseg/pipeline.hpp"
#include "nested_metaseg/synth.hpp"
#include "test_support.hpp"

using namespace nested_metaseg;
namespace fs = std::filesystem;

namespace {

SynthDatasetConfig small_dataset(int scenes) {
  SynthDatasetConfig cfg;
  cfg.scene.frame = {48, 96};
  cfg.scene.crop_step = 2;
  cfg.scene.n_crop = 3;
  cfg.scenes = scenes;
  cfg.seed = 3;
  return cfg;
}

RunConfig quick_config() {
  RunConfig c;
  c.runs = 3;
  c.seed = 7;
  c.threads = 1;
  c.meta.logistic.max_iterations = 500;
  return c;
}

}  // namespace

TEST(Pipeline, SingleCropMatchesDirectComputation) {
  Rng rng(2);
  const ProbabilityField f = nms_test::random_field(rng, 20, 30, 4, 1.0);
  const LabelMap gt = nms_test::random_labels(rng, 20, 30, 4);
  const std::vector<ProbabilityField> crops{f};
  const ImageAnalysis a = analyze_image("x", crops, 3, &gt, PredictionSource::kMean);
  EXPECT_EQ(a.mean.tensor().data, f.tensor().data);
  EXPECT_EQ(a.maps.mu_entropy.values.data, entropy_map(f).values.data);
  EXPECT_EQ(a.maps.mu_margin.values.data, margin_map(f).values.data);
  EXPECT_EQ(a.maps.mu_variation.values.data, variation_ratio_map(f).values.data);
  for (const HeatMap* h : {&a.maps.v_entropy, &a.maps.v_margin, &a.maps.v_variation, &a.maps.kl}) {
    for (double v : h->values.data) ASSERT_EQ(v, 0.0);
  }
  const SegmentMap s = connected_components(predict_labels(f));
  const auto iou = compute_iou(s, gt);
  DispersionMaps direct{entropy_map(f), margin_map(f), variation_ratio_map(f),
                        HeatMap{HeatMapKind::kVarEntropy, ScalarMap(20, 30)},
                        HeatMap{HeatMapKind::kVarMargin, ScalarMap(20, 30)},
                        HeatMap{HeatMapKind::kVarVariationRatio, ScalarMap(20, 30)},
                        HeatMap{HeatMapKind::kKullbackLeibler, ScalarMap(20, 30)}};
  const auto recs = extract_records("x", f, s, direct, &iou);
  ASSERT_EQ(recs.size(), a.records.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(recs[i].features, a.records[i].features);
    EXPECT_EQ(recs[i].iou_adj, a.records[i].iou_adj);
  }
}

TEST(Pipeline, MergedPredictionSourceUsesLastField) {
  SynthConfig sc;
  sc.frame = {32, 64};
  sc.crop_step = 2;
  sc.n_crop = 2;
  sc.seed = 1;
  const SynthScene s = generate_scene(sc);
  const CropPyramid p = build_pyramid(s.crops, 2);
  const ImageAnalysis a = analyze_image("x", s.crops, 2, nullptr, PredictionSource::kMerged);
  EXPECT_EQ(a.prediction.data, predict_labels(p.merged.back()).data);
  EXPECT_FALSE(a.iou.has_value());
}

TEST(Pipeline, CropFieldLoadingRules) {
  const auto dir = nms_test::scratch_dir("pipeline_crops");
  Rng rng(4);
  save_probability_field(nms_test::random_field(rng, 16, 32, 3), dir / "p.npy");
  ManifestImage img;
  img.id = "a";
  img.probs = dir / "p.npy";
  EXPECT_EQ(load_crop_fields(img, {2, 0, false}, 3).size(), 1u);
  EXPECT_THROW(load_crop_fields(img, {2, 2, false}, 3), ValidationError);
  EXPECT_EQ(load_crop_fields(img, {2, 2, true}, 3).size(), 3u);
  EXPECT_THROW(load_crop_fields(img, {2, 2, true}, 4), ValidationError);
  EXPECT_THROW(load_crop_fields(img, {4, 2, true}, 3), GeometryError);
}

TEST(Pipeline, RunConfigFileOverridesDefaults) {
  const auto dir = nms_test::scratch_dir("pipeline_config");
  std::ofstream(dir / "c.json") << R"({"seed": 99, "runs": 4, "n_crop": 2, "predict_from": "merged",
                                       "mlp": {"epochs": 12}, "feature_sets": ["all"]})";
  RunConfig base;
  base.with_mlp = true;
  const RunConfig c = load_run_config(dir / "c.json", base);
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.runs, 4);
  EXPECT_EQ(c.n_crop, 2);
  EXPECT_EQ(c.prediction_source, PredictionSource::kMerged);
  EXPECT_EQ(c.meta.mlp.epochs, 12);
  EXPECT_TRUE(c.with_mlp);
  EXPECT_EQ(c.feature_sets, std::vector<std::string>{"all"});
  std::ofstream(dir / "bad.json") << R"({"runs": 0})";
  EXPECT_THROW(load_run_config(dir / "bad.json"), ValidationError);
  std::ofstream(dir / "broken.json") << "{";
  EXPECT_THROW(load_run_config(dir / "broken.json"), FormatError);
}

TEST(Pipeline, OutputsAreThreadCountIndependent) {
  const auto dir = nms_test::scratch_dir("pipeline_threads");
  write_synth_dataset(small_dataset(24), dir / "data", 2);
  const DatasetManifest m = load_manifest(dir / "data" / "manifest.json");
  RunConfig one = quick_config();
  one.greedy_max = 3;
  RunConfig many = one;
  many.threads = 4;
  const PipelineSummary s1 = run_pipeline(m, one, dir / "a");
  run_pipeline(m, many, dir / "b");
  EXPECT_EQ(s1.images, 24u);
  EXPECT_TRUE(s1.meta_ran) << s1.meta_skipped_reason;
  for (const char* f : {"run.json", "metrics.csv", "metrics.json", "correlations.csv", "meta/report.json",
                        "meta/report.txt", "meta/linear.json", "greedy/r2.csv", "greedy/acc.json"}) {
    ASSERT_TRUE(fs::exists(dir / "a" / f)) << f;
    EXPECT_EQ(nms_test::read_bytes(dir / "a" / f), nms_test::read_bytes(dir / "b" / f)) << f;
  }
  const std::string id = m.images[0].id;
  for (const char* f : {"mu_M.pgm", "K.pgm", "iou_adj.ppm", "predicted_iou_adj.ppm"}) {
    EXPECT_EQ(nms_test::read_bytes(dir / "a" / "images" / id / f), nms_test::read_bytes(dir / "b" / "images" / id / f)) << f;
  }
}

TEST(Pipeline, SimulatedSingleCropEqualsNoCropRun) {
  const auto dir = nms_test::scratch_dir("pipeline_nocrop");
  write_synth_dataset(small_dataset(4), dir / "data", 1);
  DatasetManifest crops = load_manifest(dir / "data" / "manifest.json");
  DatasetManifest single = crops;
  for (auto& img : single.images) {
    img.probs = img.probs_crops.front();
    img.probs_crops.clear();
  }
  RunConfig sim = quick_config();
  sim.n_crop = 0;
  sim.simulate_crops = true;
  sim.render = false;
  RunConfig plain = sim;
  plain.simulate_crops = false;
  run_pipeline(crops, sim, dir / "sim");
  run_pipeline(single, plain, dir / "plain");
  EXPECT_EQ(nms_test::read_bytes(dir / "sim" / "metrics.csv"), nms_test::read_bytes(dir / "plain" / "metrics.csv"));
  const MetricsTable t = read_metrics_csv(dir / "plain" / "metrics.csv");
  for (std::string_view name : {"v_E", "v_M", "v_V", "K"}) {
    const int col = t.column_index(name);
    for (const auto& r : t.records) ASSERT_EQ(r.features[static_cast<std::size_t>(col)], 0.0);
  }
}
