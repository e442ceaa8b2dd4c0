#include <benchmark/benchmark.h>

#include "nested_metaseg/metrics.hpp"
#include "nested_metaseg/pipeline.hpp"
#include "nested_metaseg/segmentation.hpp"
#include "nested_metaseg/synth.hpp"

using namespace nested_metaseg;
namespace bm = benchmark;

static SynthScene noisy_scene() {
  SynthConfig c;
  c.frame = {256, 512};
  c.rho = 0.4;
  c.seed = 9;
  return generate_scene(c);
}

static void BM_ConnectedComponents(bm::State& st) {
  const SynthScene s = noisy_scene();
  const LabelMap pred = predict_labels(s.crops[0]);
  for (auto _ : st) {
    SegmentMap m = connected_components(pred);
    bm::DoNotOptimize(m.ids.data());
  }
  st.SetItemsProcessed(st.iterations() * 256 * 512);
}
BENCHMARK(BM_ConnectedComponents)->Unit(bm::kMillisecond);

static void BM_ComputeIou(bm::State& st) {
  const SynthScene s = noisy_scene();
  const SegmentMap m = connected_components(predict_labels(s.crops[0]));
  for (auto _ : st) bm::DoNotOptimize(compute_iou(m, s.labels).data());
}
BENCHMARK(BM_ComputeIou)->Unit(bm::kMillisecond);

// Whole per-image analysis: pyramid, heat maps, segments, IoU and records.
static void BM_AnalyzeImage(bm::State& st) {
  const SynthScene s = noisy_scene();
  for (auto _ : st) {
    ImageAnalysis a = analyze_image("x", s.crops, 4, &s.labels, PredictionSource::kMean);
    bm::DoNotOptimize(a.records.data());
  }
}
BENCHMARK(BM_AnalyzeImage)->Unit(bm::kMillisecond);

BENCHMARK_MAIN();
