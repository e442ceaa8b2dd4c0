#include <benchmark/benchmark.h>

#include "nested_metaseg/crop_pyramid.hpp"
#include "nested_metaseg/synth.hpp"

using namespace nested_metaseg;
namespace bm = benchmark;

static SynthScene scene(int rows, int cols, int n_crop) {
  SynthConfig c;
  c.frame = {rows, cols};
  c.classes = 8;
  c.n_crop = n_crop;
  c.crop_step = 4;
  c.seed = 3;
  return generate_scene(c);
}

static void BM_MergeCrops(bm::State& st) {
  const SynthScene s = scene(static_cast<int>(st.range(0)), 2 * static_cast<int>(st.range(0)), 8);
  for (auto _ : st) {
    ProbabilityField mean = merge_crops(s.crops, 4, {});
    bm::DoNotOptimize(mean.values().data());
  }
  st.SetItemsProcessed(st.iterations() * st.range(0) * st.range(0) * 2);
}
BENCHMARK(BM_MergeCrops)->Arg(128)->Arg(256)->Unit(bm::kMillisecond);

static void BM_BuildPyramid(bm::State& st) {
  const SynthScene s = scene(256, 512, static_cast<int>(st.range(0)));
  for (auto _ : st) {
    CropPyramid p = build_pyramid(s.crops, 4);
    bm::DoNotOptimize(p.mean.values().data());
  }
}
BENCHMARK(BM_BuildPyramid)->Arg(2)->Arg(8)->Unit(bm::kMillisecond);

static void BM_BilinearResize(bm::State& st) {
  const SynthScene s = scene(256, 512, 8);
  for (auto _ : st) {
    ProbabilityField up = bilinear_resize(s.crops.back(), {256, 512});
    bm::DoNotOptimize(up.values().data());
  }
}
BENCHMARK(BM_BilinearResize)->Unit(bm::kMillisecond);

BENCHMARK_MAIN();
